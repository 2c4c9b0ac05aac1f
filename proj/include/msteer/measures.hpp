#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "msteer/grid.hpp"

namespace msteer {

/// Weighted point cloud Σ w_i δ_{x_i} with Σ w_i = 1.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<Vec> points, std::vector<double> weights);
  /// Equal weights 1/N.
  static EmpiricalMeasure uniform(std::vector<Vec> points);
  static EmpiricalMeasure dirac(Vec point);

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.front().size(); }
  const std::vector<Vec>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Same weights, new atom locations (push-forward bookkeeping).
  EmpiricalMeasure with_points(std::vector<Vec> points) const;

 private:
  std::vector<Vec> points_;
  std::vector<double> weights_;
};

struct FirstMoment {
  Vec mean;   // ∫ x dμ / mass
  double m1;  // ∫ |x| dμ / mass
};

FirstMoment moment_first(const GridMeasure& m);
FirstMoment moment_first(const EmpiricalMeasure& m);

/// Largest atom count accepted by w1_distance in dimension >= 2.
inline constexpr std::size_t kW1AtomLimit = 64;

/// Exact 1-Wasserstein distance with Euclidean ground cost. Quantile formula in 1D; exact
/// transportation solve for dimension >= 2 (limited to kW1AtomLimit atoms per measure).
double w1_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// ∫ |F_a − F_b| over the line; both measures must be one-dimensional.
double w1_quantile_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Optimal transport cost Σ π_ij |x_i − y_j| by successive shortest paths. No size cap;
/// cost is O((n+m)^2 · nm) in the worst case.
double exact_transport_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Draws n atoms at cell centers with probability proportional to cell mass.
EmpiricalMeasure grid_to_empirical(const GridMeasure& m, std::size_t n_samples, std::uint64_t seed);

}  // namespace msteer
