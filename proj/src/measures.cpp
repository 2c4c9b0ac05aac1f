#include "msteer/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "msteer/errors.hpp"

namespace msteer {

namespace {

constexpr double kZeroMass = 1e-15;

double distance(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

double norm(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void require_same_dim(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<Vec> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty()) throw EmptyMeasure();
  if (points_.size() != weights_.size()) throw DimensionMismatch(points_.size(), weights_.size());
  const std::size_t n = points_.front().size();
  if (n == 0) throw ValidationError("points", "zero-dimensional atom");
  double total = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].size() != n) throw DimensionMismatch(n, points_[i].size());
    for (double v : points_[i])
      if (!std::isfinite(v)) throw NonFinite("atom location");
    if (!std::isfinite(weights_[i]) || weights_[i] < 0.0)
      throw ValidationError("weights", "weights must be finite and nonnegative");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("weights", "weights must sum to 1");
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<Vec> points) {
  if (points.empty()) throw EmptyMeasure();
  const std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
  return EmpiricalMeasure(std::move(points), w);
}

EmpiricalMeasure EmpiricalMeasure::dirac(Vec point) {
  return EmpiricalMeasure({std::move(point)}, {1.0});
}

EmpiricalMeasure EmpiricalMeasure::with_points(std::vector<Vec> points) const {
  return EmpiricalMeasure(std::move(points), weights_);
}

FirstMoment moment_first(const GridMeasure& m) {
  const GridSpec& g = m.spec();
  double mass = 0.0, sa = 0.0, sb = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < g.na(); ++i) {
    const double a = g.center_a(i);
    for (std::size_t j = 0; j < g.nb(); ++j) {
      const double b = g.center_b(j);
      const double w = m.density_at(i, j);
      mass += w;
      sa += w * a;
      sb += w * b;
      s1 += w * std::hypot(a, b);
    }
  }
  if (mass * g.cell_area() <= kZeroMass) throw ZeroMass();
  return {{sa / mass, sb / mass}, s1 / mass};
}

FirstMoment moment_first(const EmpiricalMeasure& m) {
  Vec mean(m.dim(), 0.0);
  double mass = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double w = m.weights()[i];
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += w * m.points()[i][k];
    s1 += w * norm(m.points()[i]);
    mass += w;
  }
  if (mass <= kZeroMass) throw ZeroMass();
  for (double& v : mean) v /= mass;
  return {mean, s1 / mass};
}

double w1_quantile_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != 1) throw DimensionMismatch(1, a.dim());
  require_same_dim(a, b);
  // Merge signed atoms and integrate |F_a - F_b| between consecutive locations.
  std::vector<std::pair<double, double>> events;
  events.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) events.emplace_back(a.points()[i][0], a.weights()[i]);
  for (std::size_t i = 0; i < b.size(); ++i) events.emplace_back(b.points()[i][0], -b.weights()[i]);
  std::sort(events.begin(), events.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  double cdf_gap = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < events.size(); ++k) {
    cdf_gap += events[k].second;
    total += std::abs(cdf_gap) * (events[k + 1].first - events[k].first);
  }
  return total;
}

double exact_transport_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require_same_dim(a, b);
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = distance(a.points()[i], b.points()[j]);

  std::vector<double> supply(a.weights()), demand(b.weights());
  const double total_b = std::accumulate(demand.begin(), demand.end(), 0.0);
  const double total_a = std::accumulate(supply.begin(), supply.end(), 0.0);
  for (double& d : demand) d *= total_a / total_b;
  const double eps = 1e-15;

  // Successive shortest paths on the bipartite residual graph with Johnson potentials.
  // Nodes 0..n-1 are sources, n..n+m-1 are sinks.
  std::vector<double> flow(n * m, 0.0);
  std::vector<double> potential(n + m, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n + m);
  std::vector<std::ptrdiff_t> parent(n + m);
  std::vector<char> done(n + m);

  auto remaining_supply = [&] {
    for (double s : supply)
      if (s > eps) return true;
    return false;
  };

  while (remaining_supply()) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > eps) dist[i] = 0.0;

    std::ptrdiff_t target = -1;
    for (;;) {
      std::ptrdiff_t u = -1;
      for (std::size_t v = 0; v < n + m; ++v)
        if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[static_cast<std::size_t>(u)]))
          u = static_cast<std::ptrdiff_t>(v);
      if (u < 0) break;
      const auto uu = static_cast<std::size_t>(u);
      done[uu] = 1;
      if (uu >= n && demand[uu - n] > eps) {
        target = u;
        break;
      }
      if (uu < n) {
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t v = n + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, cost[uu * m + j] + potential[uu] - potential[v]);
          if (dist[uu] + rc < dist[v]) {
            dist[v] = dist[uu] + rc;
            parent[v] = u;
          }
        }
      } else {
        const std::size_t j = uu - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (done[i] || flow[i * m + j] <= eps) continue;
          const double rc = std::max(0.0, -cost[i * m + j] + potential[uu] - potential[i]);
          if (dist[uu] + rc < dist[i]) {
            dist[i] = dist[uu] + rc;
            parent[i] = u;
          }
        }
      }
    }
    if (target < 0) break;  // residual supply below tolerance everywhere reachable

    const double dt = dist[static_cast<std::size_t>(target)];
    for (std::size_t v = 0; v < n + m; ++v) potential[v] += std::min(dist[v], dt);

    // Bottleneck along the path.
    double push = demand[static_cast<std::size_t>(target) - n];
    std::size_t v = static_cast<std::size_t>(target);
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u >= n) push = std::min(push, flow[v * m + (u - n)]);  // reverse arc sink u -> source v
      v = u;
    }
    push = std::min(push, supply[v]);

    v = static_cast<std::size_t>(target);
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u < n)
        flow[u * m + (v - n)] += push;
      else
        flow[v * m + (u - n)] -= push;
      v = u;
    }
    supply[v] -= push;
    demand[static_cast<std::size_t>(target) - n] -= push;
  }

  double total = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k)
    if (flow[k] > 0.0) total += flow[k] * cost[k];
  return total;
}

double w1_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require_same_dim(a, b);
  if (a.dim() == 1) return w1_quantile_1d(a, b);
  if (a.size() > kW1AtomLimit) throw TooLarge(a.size(), kW1AtomLimit);
  if (b.size() > kW1AtomLimit) throw TooLarge(b.size(), kW1AtomLimit);
  return exact_transport_cost(a, b);
}

EmpiricalMeasure grid_to_empirical(const GridMeasure& m, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw ValidationError("n_samples", "must be positive");
  const GridSpec& g = m.spec();
  std::vector<double> cumulative(g.size());
  double running = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    running += m.cell_mass(k);
    cumulative[k] = running;
  }
  if (running <= kZeroMass) throw ZeroMass();

  std::mt19937_64 rng(seed);
  std::vector<Vec> points;
  points.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    // 53 random bits in [0, 1); independent of the standard library's distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cumulative.begin());
    if (k >= g.size()) k = g.size() - 1;
    const std::size_t i = k / g.nb(), j = k % g.nb();
    points.push_back({g.center_a(i), g.center_b(j)});
  }
  return EmpiricalMeasure::uniform(std::move(points));
}

}  // namespace msteer
