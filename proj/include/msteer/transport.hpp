#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msteer/control.hpp"
#include "msteer/fields.hpp"
#include "msteer/grid.hpp"

namespace msteer {

/// Normal velocities on cell faces. Face (i, j) of `a` sits at a = face(0, i) between cells
/// i-1 and i; face (i, j) of `b` sits at b = face(1, j).
struct FaceVelocity {
  GridSpec spec;
  std::vector<double> a;  // (na + 1) x nb, index i * nb + j
  std::vector<double> b;  // na x (nb + 1), index i * (nb + 1) + j

  explicit FaceVelocity(const GridSpec& s)
      : spec(s), a((s.na() + 1) * s.nb(), 0.0), b(s.na() * (s.nb() + 1), 0.0) {}

  double& at_a(std::size_t i, std::size_t j) { return a[i * spec.nb() + j]; }
  double at_a(std::size_t i, std::size_t j) const { return a[i * spec.nb() + j]; }
  double& at_b(std::size_t i, std::size_t j) { return b[i * (spec.nb() + 1) + j]; }
  double at_b(std::size_t i, std::size_t j) const { return b[i * (spec.nb() + 1) + j]; }
};

/// Largest fraction of a cell's mass leaving it in one donor-cell step:
/// τ max_ij [(w⁺_{i+½} − w⁻_{i−½}) / h_a + (w⁺_{j+½} − w⁻_{j−½}) / h_b].
/// Equals τ (|w_a| / h_a + |w_b| / h_b) for constant fields. Positivity holds iff <= 1.
double cfl_number(const FaceVelocity& w, double tau);

/// One explicit donor-cell upwind step with zero-density ghost cells.
GridMeasure advance_density(const GridMeasure& rho, const FaceVelocity& w, double tau);

/// A control family sampled once on a grid: normal components at face midpoints and full
/// vectors at cell centers, for drift and every basis field.
class GridFamily {
 public:
  GridFamily(const ControlFamily& cf, const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  const ControlFamily& family() const { return family_; }
  std::size_t controls() const { return face_basis_.size(); }

  void face_velocity(std::span<const double> u, FaceVelocity& out) const;
  void center_velocity(std::span<const double> u, GridVectorField& out) const;
  const GridVectorField& basis_at_centers(std::size_t k) const { return center_basis_[k]; }

 private:
  ControlFamily family_;
  GridSpec spec_;
  FaceVelocity face_drift_;
  std::vector<FaceVelocity> face_basis_;
  GridVectorField center_drift_;
  std::vector<GridVectorField> center_basis_;
};

/// Sorted time-node indices whose frames a solver keeps. Empty means "all nodes".
using NodeSet = std::vector<std::size_t>;
NodeSet strided_nodes(const TimeGrid& tg, std::size_t stride);

/// Refinement budget: a step whose CFL number exceeds 1 is split into 2^s equal sub-steps.
inline constexpr std::size_t kMaxSubsteps = 1024;

struct DensityTrajectory {
  TimeGrid time_grid;
  std::vector<std::size_t> nodes;
  std::vector<GridMeasure> frames;
  double mass_loss = 0.0;          // initial mass minus final mass
  std::size_t max_substeps = 1;    // largest sub-step split used

  bool has(std::size_t node) const;
  const GridMeasure& at(std::size_t node) const;
  const GridMeasure& final_frame() const { return frames.back(); }
};

struct DualState {
  TimeGrid time_grid;
  std::vector<std::size_t> nodes;
  std::vector<GridField> frames;
  std::size_t max_substeps = 1;

  bool has(std::size_t node) const;
  const GridField& at(std::size_t node) const;
};

/// Advances `rho` over time steps [from, to) of `tg` holding control `u`, with automatic
/// sub-stepping. Adds the largest split used to `max_substeps`.
GridMeasure advance_steps(const GridMeasure& rho, const GridFamily& fam, std::span<const double> u,
                          const TimeGrid& tg, std::size_t from, std::size_t to,
                          std::size_t* max_substeps = nullptr);

/// Forward continuity equation ∂_t μ + ∇·(F_u μ) = 0 by donor-cell upwind.
DensityTrajectory solve_forward(const GridMeasure& initial, const GridFamily& fam, const ControlSignal& u,
                                const TimeGrid& tg, const NodeSet& keep = {});
DensityTrajectory solve_forward(const GridMeasure& initial, const ControlFamily& cf, const ControlSignal& u,
                                const TimeGrid& tg, const NodeSet& keep = {});

/// Backward dual transport ∂_t p + ∇p·F_u = 0, p_T = −ℓ, by upwind differences. Boundary
/// cells fall back to the one-sided difference pointing into the domain.
DualState solve_dual_backward(const GridField& terminal_cost, const GridFamily& fam, const ControlSignal& u,
                              const TimeGrid& tg, const NodeSet& keep = {});
DualState solve_dual_backward(const GridField& terminal_cost, const ControlFamily& cf, const ControlSignal& u,
                              const TimeGrid& tg, const NodeSet& keep = {});

/// Central differences inside, second-order one-sided differences on boundary cells.
GridVectorField gradient_field(const GridField& p);

}  // namespace msteer
