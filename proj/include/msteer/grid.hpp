#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace msteer {

using Vec = std::vector<double>;

/// Uniform cell-centered grid over a rectangle. Axis 0 is `a`, axis 1 is `b`.
class GridSpec {
 public:
  GridSpec(std::array<double, 2> domain_min, std::array<double, 2> domain_max,
           std::array<std::size_t, 2> cells_per_axis);

  const std::array<double, 2>& domain_min() const { return lo_; }
  const std::array<double, 2>& domain_max() const { return hi_; }
  const std::array<std::size_t, 2>& cells() const { return n_; }
  std::size_t na() const { return n_[0]; }
  std::size_t nb() const { return n_[1]; }
  std::size_t size() const { return n_[0] * n_[1]; }

  double h(std::size_t axis) const { return h_[axis]; }
  double cell_area() const { return h_[0] * h_[1]; }

  /// Storage is a-major: index(i, j) = i * nb + j.
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_[1] + j; }
  double center_a(std::size_t i) const { return lo_[0] + (static_cast<double>(i) + 0.5) * h_[0]; }
  double center_b(std::size_t j) const { return lo_[1] + (static_cast<double>(j) + 0.5) * h_[1]; }
  /// Coordinate of the face between cell i-1 and i along `axis` (i = 0..n).
  double face(std::size_t axis, std::size_t i) const {
    return lo_[axis] + static_cast<double>(i) * h_[axis];
  }
  bool contains(double a, double b) const {
    return a >= lo_[0] && a <= hi_[0] && b >= lo_[1] && b <= hi_[1];
  }

  bool operator==(const GridSpec& other) const = default;

 private:
  std::array<double, 2> lo_;
  std::array<double, 2> hi_;
  std::array<std::size_t, 2> n_;
  std::array<double, 2> h_;
};

/// Scalar values at cell centers.
struct GridField {
  GridSpec spec;
  std::vector<double> values;

  explicit GridField(const GridSpec& s, double fill = 0.0) : spec(s), values(s.size(), fill) {}
  GridField(const GridSpec& s, std::vector<double> v);

  double& at(std::size_t i, std::size_t j) { return values[spec.index(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return values[spec.index(i, j)]; }

  /// Bilinear interpolation between cell centers; constant extrapolation outside.
  double interpolate(double a, double b) const;
};

template <class F>
GridField sample_on_grid(const GridSpec& spec, F&& f) {
  GridField out(spec);
  for (std::size_t i = 0; i < spec.na(); ++i) {
    const double a = spec.center_a(i);
    for (std::size_t j = 0; j < spec.nb(); ++j) out.at(i, j) = f(a, spec.center_b(j));
  }
  return out;
}

struct GridVectorField {
  GridField a;
  GridField b;
};

/// Nonnegative density (mass per unit area) on a grid. Mass is never renormalized implicitly.
class GridMeasure {
 public:
  GridMeasure(const GridSpec& spec, std::vector<double> density);

  /// Density proportional to `weights`, scaled to unit mass.
  static GridMeasure normalized(const GridSpec& spec, std::vector<double> weights);
  /// Unit point mass split bilinearly over the four nearest cell centers.
  static GridMeasure point_mass(const GridSpec& spec, double a, double b);
  /// Weighted atoms split bilinearly (cloud-in-cell), scaled to unit mass.
  static GridMeasure deposit(const GridSpec& spec, const std::vector<std::vector<double>>& points,
                             const std::vector<double>& weights);

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& density() const { return density_; }
  double density_at(std::size_t i, std::size_t j) const { return density_[spec_.index(i, j)]; }
  double mass() const;
  /// Mass held in cell (i, j).
  double cell_mass(std::size_t k) const { return density_[k] * spec_.cell_area(); }

  /// ∫ f dμ by the density-weighted midpoint rule.
  double integrate(const GridField& f) const;

 private:
  GridSpec spec_;
  std::vector<double> density_;
};

}  // namespace msteer
