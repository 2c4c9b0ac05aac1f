#include "msteer/pmp.hpp"

#include <algorithm>
#include <cmath>

#include "msteer/errors.hpp"

namespace msteer {

SwitchingVector switching_vector(const GridVectorField& grad_p, const GridMeasure& mu, const GridFamily& fam) {
  const GridSpec& g = mu.spec();
  if (!(grad_p.a.spec == g) || !(fam.spec() == g)) throw IncompatibleGrids();
  SwitchingVector sigma(fam.controls(), 0.0);
  const auto& rho = mu.density();
  for (std::size_t k = 0; k < fam.controls(); ++k) {
    const auto& fa = fam.basis_at_centers(k).a.values;
    const auto& fb = fam.basis_at_centers(k).b.values;
    double s = 0.0;
    for (std::size_t c = 0; c < rho.size(); ++c) {
      if (rho[c] == 0.0) continue;
      s += rho[c] * (grad_p.a.values[c] * fa[c] + grad_p.b.values[c] * fb[c]);
    }
    sigma[k] = s * g.cell_area();
  }
  return sigma;
}

SwitchingVector switching_vector(const GridField& p, const GridMeasure& mu, const GridFamily& fam) {
  return switching_vector(gradient_field(p), mu, fam);
}

SwitchingVector switching_vector(const GridField& p, const GridMeasure& mu, const GridFamily& fam_mu,
                                 const GridField& q, const GridMeasure& nu, const GridFamily& fam_nu) {
  SwitchingVector s = switching_vector(p, mu, fam_mu);
  const SwitchingVector t = switching_vector(q, nu, fam_nu);
  if (s.size() != t.size()) throw DimensionMismatch(s.size(), t.size());
  for (std::size_t k = 0; k < s.size(); ++k) s[k] += t[k];
  return s;
}

SwitchingVector switching_vector(const GridVectorField& grad_p, const EmpiricalMeasure& mu,
                                 const ControlFamily& cf) {
  if (mu.dim() != 2 || cf.dim() != 2) throw DimensionMismatch(2, mu.dim());
  SwitchingVector sigma(cf.controls(), 0.0);
  double f[2];
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Vec& x = mu.points()[i];
    const double ga = grad_p.a.interpolate(x[0], x[1]);
    const double gb = grad_p.b.interpolate(x[0], x[1]);
    for (std::size_t k = 0; k < cf.controls(); ++k) {
      cf.basis[k].eval(x, f);
      sigma[k] += mu.weights()[i] * (ga * f[0] + gb * f[1]);
    }
  }
  return sigma;
}

double default_tie_tolerance(std::span<const double> sigma) {
  double m = 0.0;
  for (double s : sigma) m = std::max(m, std::abs(s));
  return 1e-9 * (1.0 + m);
}

Vec extremal_control(std::span<const double> sigma, const ControlSet& U, std::span<const double> fallback,
                     const TieBreak& tie) {
  const std::size_t m = U.dim();
  if (sigma.size() != m) throw DimensionMismatch(m, sigma.size());
  if (fallback.size() != m) throw DimensionMismatch(m, fallback.size());
  if (!tie.explore.empty() && tie.explore.size() != 1 && tie.explore.size() != m)
    throw DimensionMismatch(m, tie.explore.size());
  const double eps = tie.eps.value_or(default_tie_tolerance(sigma));
  Vec u(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (sigma[k] > eps) {
      u[k] = U.hi()[k];
    } else if (sigma[k] < -eps) {
      u[k] = U.lo()[k];
    } else {
      const int e = tie.explore.empty() ? 0 : tie.explore.size() == 1 ? tie.explore[0] : tie.explore[k];
      u[k] = e > 0 ? U.hi()[k] : e < 0 ? U.lo()[k] : std::clamp(fallback[k], U.lo()[k], U.hi()[k]);
    }
  }
  return u;
}

ResidualReport pmp_residual(const ControlSignal& u, const TimeGrid& tg, const ControlSet& U,
                            const std::vector<std::size_t>& nodes, const SigmaAt& sigma_at) {
  ResidualReport report;
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const std::size_t n = nodes[idx];
    if (n >= tg.steps()) throw ValidationError("nodes", "residual nodes must precede the final time");
    const SwitchingVector sigma = sigma_at(n);
    const Vec& un = u.on_step(tg, n);
    double dot = 0.0;
    for (std::size_t k = 0; k < sigma.size(); ++k) dot += sigma[k] * un[k];
    const double r = std::max(0.0, U.support(sigma) - dot);
    const double next = idx + 1 < nodes.size() ? tg.time(nodes[idx + 1]) : tg.t_final();
    report.residual_max = std::max(report.residual_max, r);
    report.residual_l1 += r * (next - tg.time(n));
    report.rows.push_back({tg.time(n), r, sigma});
  }
  return report;
}

double cost_increment(const ControlSignal& reference, const ControlSignal& candidate, const TimeGrid& tg,
                      const SigmaAt& sigma_at) {
  if (reference.controls() != candidate.controls())
    throw DimensionMismatch(reference.controls(), candidate.controls());
  double total = 0.0;
  SwitchingVector left = sigma_at(0);
  for (std::size_t n = 0; n < tg.steps(); ++n) {
    SwitchingVector right = sigma_at(n + 1);
    const Vec& ub = reference.on_step(tg, n);
    const Vec& uc = candidate.on_step(tg, n);
    double g = 0.0;
    for (std::size_t k = 0; k < ub.size(); ++k) g += (ub[k] - uc[k]) * (left[k] + right[k]);
    total += 0.5 * tg.tau() * g;
    left = std::move(right);
  }
  return total;
}

}  // namespace msteer
