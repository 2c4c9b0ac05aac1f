#include "msteer/control.hpp"

#include <algorithm>
#include <cmath>

#include "msteer/errors.hpp"
#include "msteer/fields.hpp"

namespace msteer {

TimeGrid::TimeGrid(double t0, double t_final, std::size_t n_steps) : t0_(t0), t1_(t_final), n_(n_steps) {
  if (!(std::isfinite(t0) && std::isfinite(t_final)) || !(t_final > t0))
    throw ValidationError("time", "horizon must satisfy T > t0");
  if (n_steps == 0) throw ValidationError("time.steps", "must be positive");
  tau_ = (t1_ - t0_) / static_cast<double>(n_);
}

std::size_t TimeGrid::node_of(double t) const {
  const double s = (t - t0_) / tau_;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-9 || r < 0.0 || r > static_cast<double>(n_))
    throw ValidationError("partition", "time " + std::to_string(t) + " is not on the time grid");
  return static_cast<std::size_t>(r);
}

Partition::Partition(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw ValidationError("partition", "needs at least two nodes");
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!std::isfinite(nodes_[k])) throw NonFinite("partition node");
    if (k > 0 && !(nodes_[k] > nodes_[k - 1]))
      throw ValidationError("partition", "nodes must be strictly increasing");
  }
}

Partition Partition::uniform(double t0, double t_final, std::size_t intervals) {
  if (intervals == 0) throw ValidationError("partition", "needs at least one interval");
  std::vector<double> nodes(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k)
    nodes[k] = t0 + (t_final - t0) * static_cast<double>(k) / static_cast<double>(intervals);
  nodes.back() = t_final;
  return Partition(std::move(nodes));
}

Partition Partition::on_grid(const TimeGrid& tg, const std::vector<std::size_t>& grid_nodes) {
  if (grid_nodes.empty() || grid_nodes.front() != 0 || grid_nodes.back() != tg.steps())
    throw ValidationError("partition", "grid partition must span the whole horizon");
  std::vector<double> nodes;
  nodes.reserve(grid_nodes.size());
  for (std::size_t n : grid_nodes) nodes.push_back(tg.time(n));
  return Partition(std::move(nodes));
}

Partition Partition::uniform_on_grid(const TimeGrid& tg, std::size_t intervals) {
  if (intervals == 0) throw ValidationError("partition", "needs at least one interval");
  intervals = std::min(intervals, tg.steps());
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k <= intervals; ++k) {
    const auto n = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(tg.steps()) / static_cast<double>(intervals)));
    if (nodes.empty() || n > nodes.back()) nodes.push_back(n);
  }
  return on_grid(tg, nodes);
}

double Partition::diam() const {
  double d = 0.0;
  for (std::size_t k = 1; k < nodes_.size(); ++k) d = std::max(d, nodes_[k] - nodes_[k - 1]);
  return d;
}

std::size_t Partition::interval_of(double t) const {
  if (t >= nodes_.back()) return intervals() - 1;
  if (t <= nodes_.front()) return 0;
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

std::vector<std::size_t> Partition::grid_nodes(const TimeGrid& tg) const {
  std::vector<std::size_t> out;
  out.reserve(nodes_.size());
  for (double t : nodes_) out.push_back(tg.node_of(t));
  return out;
}

Partition Partition::refined(const TimeGrid& tg) const {
  const auto g = grid_nodes(tg);
  std::vector<std::size_t> out;
  out.push_back(g.front());
  for (std::size_t k = 1; k < g.size(); ++k) {
    if (g[k] - g[k - 1] > 1) out.push_back(g[k - 1] + (g[k] - g[k - 1]) / 2);
    out.push_back(g[k]);
  }
  return on_grid(tg, out);
}

ControlSignal::ControlSignal(Partition partition, std::vector<Vec> values)
    : partition_(std::move(partition)), values_(std::move(values)) {
  if (values_.size() != partition_.intervals())
    throw DimensionMismatch(partition_.intervals(), values_.size());
  for (const auto& v : values_) {
    if (v.size() != values_.front().size() || v.empty())
      throw ValidationError("control", "inconsistent control dimension");
    for (double x : v)
      if (!std::isfinite(x)) throw NonFinite("control value");
  }
}

ControlSignal ControlSignal::constant(double t0, double t_final, Vec value) {
  return ControlSignal(Partition({t0, t_final}), {std::move(value)});
}

bool ControlSignal::within(const ControlSet& U, double tol) const {
  return std::all_of(values_.begin(), values_.end(), [&](const Vec& v) { return U.contains(v, tol); });
}

}  // namespace msteer
