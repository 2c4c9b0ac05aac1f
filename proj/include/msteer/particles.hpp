#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "msteer/control.hpp"
#include "msteer/fields.hpp"
#include "msteer/measures.hpp"

namespace msteer {

enum class Integrator { Rk4, Euler };

/// Flow of ẋ = F_{u(t)}(x) for a piecewise-constant control. Each control-constancy interval
/// (clipped to the requested time span) is integrated with a fixed number of steps.
class FlowMap {
 public:
  FlowMap(ControlFamily family, ControlSignal control, std::size_t steps_per_interval = 4,
          Integrator scheme = Integrator::Rk4);

  const ControlFamily& family() const { return family_; }
  const ControlSignal& control() const { return control_; }
  std::size_t steps_per_interval() const { return steps_; }
  Integrator scheme() const { return scheme_; }
  double t0() const { return control_.partition().start(); }
  double t_final() const { return control_.partition().end(); }

  /// X_{t_from → t_to}(x0); integrates in reversed time when t_to < t_from.
  Vec operator()(std::span<const double> x0, double t_from, double t_to) const;

 private:
  void integrate(Vec& x, std::span<const double> u, double t_start, double t_end, std::size_t steps) const;

  ControlFamily family_;
  ControlSignal control_;
  std::size_t steps_;
  Integrator scheme_;
};

inline Vec flow(const FlowMap& fm, std::span<const double> x0, double t_from, double t_to) {
  return fm(x0, t_from, t_to);
}

/// (X_{t_from → t_to})♯ m; weights are carried over unchanged.
EmpiricalMeasure pushforward(const FlowMap& fm, const EmpiricalMeasure& m, double t_from, double t_to);

/// Two labeled populations at a common time; `y` is absent for single-population problems.
struct EnsembleState {
  EmpiricalMeasure x;
  std::optional<EmpiricalMeasure> y;
  double time = 0.0;
};

/// Σ w_i ℓ1(x_i) + Σ w_j ℓ2(y_j)
double ensemble_cost(const EnsembleState& state, const ScalarField& cost_x, const ScalarField& cost_y);
double expected_cost(const EmpiricalMeasure& m, const ScalarField& cost);

/// p_t(x) = −ℓ(X_{t → T}(x)) at every probe.
std::vector<double> dual_at_points(const FlowMap& fm, const ScalarField& cost, double t,
                                   const std::vector<Vec>& probes);

}  // namespace msteer
