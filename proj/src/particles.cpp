#include "msteer/particles.hpp"

#include <algorithm>
#include <cmath>

#include "msteer/errors.hpp"

namespace msteer {

namespace {

constexpr double kEscape = 1e12;
constexpr double kTimeSlack = 1e-12;

void check_finite(const Vec& x) {
  for (double v : x)
    if (!std::isfinite(v) || std::abs(v) > kEscape) throw NonFinite("particle state");
}

}  // namespace

FlowMap::FlowMap(ControlFamily family, ControlSignal control, std::size_t steps_per_interval, Integrator scheme)
    : family_(std::move(family)), control_(std::move(control)), steps_(steps_per_interval), scheme_(scheme) {
  if (steps_ == 0) throw ValidationError("integrator.steps", "must be positive");
  if (control_.controls() != family_.controls())
    throw DimensionMismatch(family_.controls(), control_.controls());
}

void FlowMap::integrate(Vec& x, std::span<const double> u, double t_start, double t_end, std::size_t steps) const {
  const std::size_t n = x.size();
  const double dt = (t_end - t_start) / static_cast<double>(steps);
  Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t s = 0; s < steps; ++s) {
    if (scheme_ == Integrator::Euler) {
      eval_controlled(family_, u, x, k1);
      for (std::size_t r = 0; r < n; ++r) x[r] += dt * k1[r];
    } else {
      eval_controlled(family_, u, x, k1);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = x[r] + 0.5 * dt * k1[r];
      eval_controlled(family_, u, tmp, k2);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = x[r] + 0.5 * dt * k2[r];
      eval_controlled(family_, u, tmp, k3);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = x[r] + dt * k3[r];
      eval_controlled(family_, u, tmp, k4);
      for (std::size_t r = 0; r < n; ++r) x[r] += dt / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
    }
    check_finite(x);
  }
}

Vec FlowMap::operator()(std::span<const double> x0, double t_from, double t_to) const {
  if (x0.size() != family_.dim()) throw DimensionMismatch(family_.dim(), x0.size());
  const double lo = t0() - kTimeSlack, hi = t_final() + kTimeSlack;
  if (t_from < lo || t_from > hi || t_to < lo || t_to > hi)
    throw ValidationError("flow", "time span outside the control horizon");
  Vec x(x0.begin(), x0.end());
  check_finite(x);
  if (t_from == t_to) return x;

  const auto& nodes = control_.partition().nodes();
  const bool forward = t_to > t_from;
  const double a = std::min(t_from, t_to), b = std::max(t_from, t_to);
  std::size_t first = control_.partition().interval_of(a);
  std::size_t last = control_.partition().interval_of(b);
  // b on a partition node belongs to the previous interval here.
  if (last > first && b <= nodes[last]) --last;

  auto piece = [&](std::size_t k, double& s0, double& s1) {
    s0 = std::max(a, nodes[k]);
    s1 = std::min(b, nodes[k + 1]);
  };
  if (forward) {
    for (std::size_t k = first; k <= last; ++k) {
      double s0, s1;
      piece(k, s0, s1);
      if (s1 > s0) integrate(x, control_.values()[k], s0, s1, steps_);
    }
  } else {
    for (std::size_t k = last + 1; k-- > first;) {
      double s0, s1;
      piece(k, s0, s1);
      if (s1 > s0) integrate(x, control_.values()[k], s1, s0, steps_);
    }
  }
  return x;
}

EmpiricalMeasure pushforward(const FlowMap& fm, const EmpiricalMeasure& m, double t_from, double t_to) {
  std::vector<Vec> moved;
  moved.reserve(m.size());
  for (const auto& p : m.points()) moved.push_back(fm(p, t_from, t_to));
  return m.with_points(std::move(moved));
}

double expected_cost(const EmpiricalMeasure& m, const ScalarField& cost) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double c = cost(m.points()[i]);
    if (!std::isfinite(c)) throw NonFinite("terminal cost");
    total += m.weights()[i] * c;
  }
  return total;
}

double ensemble_cost(const EnsembleState& state, const ScalarField& cost_x, const ScalarField& cost_y) {
  double total = expected_cost(state.x, cost_x);
  if (state.y) total += expected_cost(*state.y, cost_y);
  return total;
}

std::vector<double> dual_at_points(const FlowMap& fm, const ScalarField& cost, double t,
                                   const std::vector<Vec>& probes) {
  std::vector<double> out;
  out.reserve(probes.size());
  for (const auto& p : probes) out.push_back(-cost(fm(p, t, fm.t_final())));
  return out;
}

}  // namespace msteer
