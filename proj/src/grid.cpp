#include "msteer/grid.hpp"

#include <algorithm>
#include <cmath>

#include "msteer/errors.hpp"

namespace msteer {
namespace {

struct Stencil {
  std::size_t i0, i1, j0, j1;
  double fa, fb;
};

// Lower-left neighbouring center and fractional offsets; clamps to the outermost centers.
void locate(const GridSpec& spec, double x, std::size_t axis, std::size_t& i0, double& frac) {
  const std::size_t n = spec.cells()[axis];
  const double s = (x - spec.domain_min()[axis]) / spec.h(axis) - 0.5;
  if (n == 1 || s <= 0.0) {
    i0 = 0;
    frac = 0.0;
  } else if (s >= static_cast<double>(n - 1)) {
    i0 = n - 2;
    frac = 1.0;
  } else {
    i0 = static_cast<std::size_t>(std::floor(s));
    frac = s - static_cast<double>(i0);
  }
}

Stencil bilinear_stencil(const GridSpec& spec, double a, double b) {
  Stencil st{};
  locate(spec, a, 0, st.i0, st.fa);
  locate(spec, b, 1, st.j0, st.fb);
  st.i1 = std::min(st.i0 + 1, spec.na() - 1);
  st.j1 = std::min(st.j0 + 1, spec.nb() - 1);
  return st;
}

}  // namespace

GridSpec::GridSpec(std::array<double, 2> domain_min, std::array<double, 2> domain_max,
                   std::array<std::size_t, 2> cells_per_axis)
    : lo_(domain_min), hi_(domain_max), n_(cells_per_axis) {
  for (std::size_t k = 0; k < 2; ++k) {
    if (!(std::isfinite(lo_[k]) && std::isfinite(hi_[k])) || !(lo_[k] < hi_[k]))
      throw ValidationError("grid.domain", "domain_min must be below domain_max on every axis");
    if (n_[k] == 0) throw ValidationError("grid.cells", "cell counts must be positive");
    h_[k] = (hi_[k] - lo_[k]) / static_cast<double>(n_[k]);
  }
}

GridField::GridField(const GridSpec& s, std::vector<double> v) : spec(s), values(std::move(v)) {
  if (values.size() != spec.size()) throw DimensionMismatch(spec.size(), values.size());
}

double GridField::interpolate(double a, double b) const {
  const Stencil st = bilinear_stencil(spec, a, b);
  return (1 - st.fa) * ((1 - st.fb) * at(st.i0, st.j0) + st.fb * at(st.i0, st.j1)) +
         st.fa * ((1 - st.fb) * at(st.i1, st.j0) + st.fb * at(st.i1, st.j1));
}

GridMeasure::GridMeasure(const GridSpec& spec, std::vector<double> density)
    : spec_(spec), density_(std::move(density)) {
  if (density_.size() != spec_.size()) throw DimensionMismatch(spec_.size(), density_.size());
  for (double d : density_) {
    if (!std::isfinite(d)) throw NonFinite("grid density");
    if (d < 0.0) throw ValidationError("density", "negative density value");
  }
}

GridMeasure GridMeasure::normalized(const GridSpec& spec, std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  total *= spec.cell_area();
  if (!(total > 1e-300)) throw ZeroMass();
  for (double& w : weights) w /= total;
  return GridMeasure(spec, std::move(weights));
}

GridMeasure GridMeasure::point_mass(const GridSpec& spec, double a, double b) {
  return deposit(spec, {{a, b}}, {1.0});
}

GridMeasure GridMeasure::deposit(const GridSpec& spec, const std::vector<std::vector<double>>& points,
                                 const std::vector<double>& weights) {
  if (points.size() != weights.size()) throw DimensionMismatch(points.size(), weights.size());
  GridField acc(spec);
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != 2) throw DimensionMismatch(2, points[k].size());
    const double a = points[k][0], b = points[k][1], w = weights[k];
    if (!spec.contains(a, b)) throw ValidationError("deposit", "atom outside the grid");
    const Stencil st = bilinear_stencil(spec, a, b);
    acc.at(st.i0, st.j0) += w * (1 - st.fa) * (1 - st.fb);
    acc.at(st.i0, st.j1) += w * (1 - st.fa) * st.fb;
    acc.at(st.i1, st.j0) += w * st.fa * (1 - st.fb);
    acc.at(st.i1, st.j1) += w * st.fa * st.fb;
  }
  return normalized(spec, std::move(acc.values));
}

double GridMeasure::mass() const {
  double total = 0.0;
  for (double d : density_) total += d;
  return total * spec_.cell_area();
}

double GridMeasure::integrate(const GridField& f) const {
  if (!(f.spec == spec_)) throw IncompatibleGrids();
  double total = 0.0;
  for (std::size_t k = 0; k < density_.size(); ++k) total += density_[k] * f.values[k];
  return total * spec_.cell_area();
}

}  // namespace msteer
