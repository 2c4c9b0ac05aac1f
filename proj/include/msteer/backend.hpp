#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "msteer/control.hpp"
#include "msteer/fields.hpp"
#include "msteer/measures.hpp"
#include "msteer/particles.hpp"
#include "msteer/pmp.hpp"
#include "msteer/transport.hpp"

namespace msteer {

/// One controlled population: its drift, terminal cost, and initial distribution in the form
/// each backend needs.
struct PopulationSpec {
  VectorField drift;
  ScalarField cost;
  std::optional<GridMeasure> grid_initial;
  std::optional<EmpiricalMeasure> particle_initial;
};

/// Problem data common to every backend. Duals always live on `grid`.
struct Problem {
  std::vector<VectorField> basis;
  ControlSet controls;
  TimeGrid time;
  GridSpec grid;
  std::vector<PopulationSpec> populations;  // 1 or 2

  void validate() const;
};

using Measure = std::variant<GridMeasure, EmpiricalMeasure>;

/// Current measure of each population.
struct ProcessState {
  std::vector<Measure> populations;
};

/// Backward duals of every population for one reference control.
struct DualSet {
  std::vector<DualState> duals;
};

/// Evolves population measures under piecewise-constant controls.
class Backend {
 public:
  explicit Backend(Problem problem);
  virtual ~Backend() = default;

  virtual std::string_view name() const = 0;

  const Problem& problem() const { return problem_; }
  const TimeGrid& time_grid() const { return problem_.time; }
  const ControlSet& controls() const { return problem_.controls; }
  std::size_t populations() const { return problem_.populations.size(); }
  const GridFamily& grid_family(std::size_t pop) const { return grid_families_[pop]; }
  const ControlFamily& family(std::size_t pop) const { return families_[pop]; }
  const GridField& grid_cost(std::size_t pop) const { return grid_costs_[pop]; }

  virtual ProcessState initial_state() const = 0;
  /// Holds `u` over time steps [from, to).
  virtual void advance(ProcessState& state, std::span<const double> u, std::size_t from, std::size_t to) const = 0;
  virtual double cost(const ProcessState& state) const = 0;
  /// Initial minus current mass of every population.
  virtual std::vector<double> mass_loss(const ProcessState& state) const = 0;
  /// σ at `node` of the listed duals against the current measures.
  virtual SwitchingVector switching(const ProcessState& state, const DualSet& duals, std::size_t node) const = 0;

  /// Open-loop state at the final time.
  virtual ProcessState simulate(const ControlSignal& u) const;
  /// Visits the open-loop state at every listed node (all nodes when empty), in order.
  virtual void rollout(const ControlSignal& u, const NodeSet& nodes,
                       const std::function<void(std::size_t, const ProcessState&)>& visit) const;

  DualSet solve_duals(const ControlSignal& u, const NodeSet& keep = {}) const;

 protected:
  Problem problem_;
  std::vector<ControlFamily> families_;
  std::vector<GridFamily> grid_families_;
  std::vector<GridField> grid_costs_;
};

/// Donor-cell densities on the problem grid.
class GridBackend final : public Backend {
 public:
  explicit GridBackend(Problem problem);

  std::string_view name() const override { return "grid"; }
  ProcessState initial_state() const override;
  void advance(ProcessState& state, std::span<const double> u, std::size_t from, std::size_t to) const override;
  double cost(const ProcessState& state) const override;
  std::vector<double> mass_loss(const ProcessState& state) const override;
  SwitchingVector switching(const ProcessState& state, const DualSet& duals, std::size_t node) const override;
};

/// Weighted particles moved by the flow; duals are still solved on the grid and their gradients
/// interpolated at the atoms.
class ParticleBackend final : public Backend {
 public:
  ParticleBackend(Problem problem, std::size_t steps_per_interval = 4);

  std::string_view name() const override { return "particles"; }
  std::size_t steps_per_interval() const { return steps_; }
  ProcessState initial_state() const override;
  void advance(ProcessState& state, std::span<const double> u, std::size_t from, std::size_t to) const override;
  double cost(const ProcessState& state) const override;
  std::vector<double> mass_loss(const ProcessState& state) const override;
  SwitchingVector switching(const ProcessState& state, const DualSet& duals, std::size_t node) const override;
  ProcessState simulate(const ControlSignal& u) const override;
  void rollout(const ControlSignal& u, const NodeSet& nodes,
               const std::function<void(std::size_t, const ProcessState&)>& visit) const override;

 private:
  std::size_t steps_;
};

}  // namespace msteer
