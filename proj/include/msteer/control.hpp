#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msteer/grid.hpp"

namespace msteer {

class ControlSet;

/// Uniform time nodes t_k = t0 + k τ, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(double t0, double t_final, std::size_t n_steps);

  double t0() const { return t0_; }
  double t_final() const { return t1_; }
  std::size_t steps() const { return n_; }
  double tau() const { return tau_; }
  double time(std::size_t node) const {
    return node == n_ ? t1_ : t0_ + static_cast<double>(node) * tau_;
  }
  /// Node index nearest to t; throws unless t is within 1e-9 τ of a node.
  std::size_t node_of(double t) const;

  bool operator==(const TimeGrid& other) const = default;

 private:
  double t0_;
  double t1_;
  std::size_t n_;
  double tau_;
};

/// Strictly increasing nodes t_0 < ... < t_K.
class Partition {
 public:
  explicit Partition(std::vector<double> nodes);
  static Partition uniform(double t0, double t_final, std::size_t intervals);
  /// Partition whose nodes are the listed time-grid nodes (must include 0 and n_steps).
  static Partition on_grid(const TimeGrid& tg, const std::vector<std::size_t>& grid_nodes);
  /// Roughly `intervals` equal pieces, snapped to time-grid nodes.
  static Partition uniform_on_grid(const TimeGrid& tg, std::size_t intervals);

  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t intervals() const { return nodes_.size() - 1; }
  double start() const { return nodes_.front(); }
  double end() const { return nodes_.back(); }
  double diam() const;
  /// k with t in [t_k, t_{k+1}); the last interval also contains its right end.
  std::size_t interval_of(double t) const;

  /// Grid node indices of the partition nodes (each node must sit on the grid).
  std::vector<std::size_t> grid_nodes(const TimeGrid& tg) const;
  /// Inserts the grid node nearest to the midpoint of every interval longer than one step.
  Partition refined(const TimeGrid& tg) const;

  bool operator==(const Partition& other) const = default;

 private:
  std::vector<double> nodes_;
};

/// Piecewise-constant control, one value per partition interval.
class ControlSignal {
 public:
  ControlSignal(Partition partition, std::vector<Vec> values);
  static ControlSignal constant(double t0, double t_final, Vec value);

  const Partition& partition() const { return partition_; }
  const std::vector<Vec>& values() const { return values_; }
  std::size_t controls() const { return values_.front().size(); }

  /// Right-continuous value at t.
  const Vec& at(double t) const { return values_[partition_.interval_of(t)]; }
  /// Value held during time step k of `tg` (sampled at the step midpoint).
  const Vec& on_step(const TimeGrid& tg, std::size_t k) const {
    return at(tg.time(k) + 0.5 * tg.tau());
  }

  bool within(const ControlSet& U, double tol = 1e-12) const;

  bool operator==(const ControlSignal& other) const = default;

 private:
  Partition partition_;
  std::vector<Vec> values_;
};

}  // namespace msteer
