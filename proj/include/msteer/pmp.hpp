#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "msteer/control.hpp"
#include "msteer/fields.hpp"
#include "msteer/measures.hpp"
#include "msteer/transport.hpp"

namespace msteer {

/// σ_k = ∫ ∇p·f^k dμ (+ ∫ ∇q·f^k dν): the coefficients of u in the maximized Hamiltonian.
using SwitchingVector = Vec;

/// Grid quadrature: density-weighted midpoint rule at cell centers.
SwitchingVector switching_vector(const GridVectorField& grad_p, const GridMeasure& mu, const GridFamily& fam);
SwitchingVector switching_vector(const GridField& p, const GridMeasure& mu, const GridFamily& fam);
/// Two-population form: p against μ plus q against ν.
SwitchingVector switching_vector(const GridField& p, const GridMeasure& mu, const GridFamily& fam_mu,
                                 const GridField& q, const GridMeasure& nu, const GridFamily& fam_nu);

/// Particle quadrature: ∇p bilinearly interpolated at the atoms.
SwitchingVector switching_vector(const GridVectorField& grad_p, const EmpiricalMeasure& mu,
                                 const ControlFamily& cf);

/// How ties in the set-valued argmax are resolved.
struct TieBreak {
  /// Absolute tie tolerance; default 1e-9 (1 + |σ|∞).
  std::optional<double> eps;
  /// Per-component override at ties: +1 picks hi_k, -1 picks lo_k, 0 keeps the fallback.
  /// Empty means all zeros; a single entry applies to every component.
  std::vector<int> explore;
};

double default_tie_tolerance(std::span<const double> sigma);

/// Componentwise bang-bang maximizer of σ·u over the box U.
Vec extremal_control(std::span<const double> sigma, const ControlSet& U, std::span<const double> fallback,
                     const TieBreak& tie = {});

struct ResidualRow {
  double t;
  double residual;
  SwitchingVector sigma;
};

struct ResidualReport {
  double residual_max = 0.0;
  double residual_l1 = 0.0;
  std::vector<ResidualRow> rows;
};

/// Switching vector of a process at a time node.
using SigmaAt = std::function<SwitchingVector(std::size_t node)>;

/// r(t) = max_{w∈U} σ(t)·w − σ(t)·u(t) at every listed node (each < n_steps); the L1 norm is
/// the left Riemann sum over the listed nodes.
ResidualReport pmp_residual(const ControlSignal& u, const TimeGrid& tg, const ControlSet& U,
                            const std::vector<std::size_t>& nodes, const SigmaAt& sigma_at);

/// ∫ ∇p̄·(v_ū − v_u) dμ_t dt, where `sigma_at` evaluates ∇p̄ against the candidate's μ_t.
/// Trapezoid rule per time step using the controls held on that step.
double cost_increment(const ControlSignal& reference, const ControlSignal& candidate, const TimeGrid& tg,
                      const SigmaAt& sigma_at);

}  // namespace msteer
