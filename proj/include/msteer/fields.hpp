#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msteer/expr.hpp"
#include "msteer/grid.hpp"

namespace msteer {

/// Autonomous vector field R^n -> R^n.
class VectorField {
 public:
  using Fn = std::function<void(std::span<const double> x, std::span<double> out)>;
  /// Row-major n x n Jacobian.
  using JacobianFn = std::function<void(std::span<const double> x, std::span<double> jac)>;

  VectorField(std::size_t dim, Fn f, JacobianFn jacobian = {}, std::string description = {});

  static VectorField from_expr(const FieldExpr& e);
  static VectorField constant(Vec value);
  static VectorField zero(std::size_t dim);

  std::size_t dim() const { return dim_; }
  bool is_zero() const { return zero_; }
  const std::string& description() const { return description_; }

  void eval(std::span<const double> x, std::span<double> out) const { f_(x, out); }
  Vec operator()(std::span<const double> x) const;
  /// Analytic Jacobian when supplied, central differences with step 1e-6 (1 + |x|) otherwise.
  void jacobian(std::span<const double> x, std::span<double> jac) const;

 private:
  std::size_t dim_;
  Fn f_;
  JacobianFn jacobian_;
  std::string description_;
  bool zero_ = false;
};

/// Scalar function R^n -> R (terminal costs).
class ScalarField {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  ScalarField(Fn f, std::string description);

  static ScalarField from_expr(const ScalarExpr& e);
  /// |x - target|^2
  static ScalarField squared_distance(Vec target);
  static ScalarField zero();

  double operator()(std::span<const double> x) const { return f_(x); }
  const std::string& description() const { return description_; }

 private:
  Fn f_;
  std::string description_;
};

/// Box U = Π [lo_k, hi_k].
class ControlSet {
 public:
  ControlSet(Vec lo, Vec hi);
  static ControlSet symmetric(std::size_t m, double bound);

  std::size_t dim() const { return lo_.size(); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  bool contains(std::span<const double> u, double tol = 1e-12) const;
  /// max_{w in U} σ·w
  double support(std::span<const double> sigma) const;
  /// All 2^m box vertices (m <= 20).
  std::vector<Vec> vertices() const;

 private:
  Vec lo_;
  Vec hi_;
};

/// Control-affine family F_u(x) = drift(x) + Σ_k u^k f^k(x).
struct ControlFamily {
  VectorField drift;
  std::vector<VectorField> basis;

  ControlFamily(VectorField drift, std::vector<VectorField> basis);

  std::size_t dim() const { return drift.dim(); }
  std::size_t controls() const { return basis.size(); }
  /// Same basis, different drift (the second population).
  ControlFamily with_drift(VectorField d) const { return ControlFamily(std::move(d), basis); }
};

void eval_controlled(const ControlFamily& cf, std::span<const double> u, std::span<const double> x,
                     std::span<double> out);
Vec eval_controlled(const ControlFamily& cf, std::span<const double> u, std::span<const double> x);

struct H1Constants {
  double growth;     // smallest C with |F(x)| <= C (1 + |x|) over the probes
  double lipschitz;  // smallest C with |F(x) - F(y)| <= C |x - y| over probe pairs
};

/// Empirical sublinear-growth and Lipschitz constants on the grid domain. Probes are the domain
/// corners, edge midpoints, and center followed by a Halton sequence.
H1Constants validate_h1(const VectorField& vf, const GridSpec& spec, std::size_t n_probe);

/// Probe points used by validate_h1.
std::vector<Vec> h1_probes(const GridSpec& spec, std::size_t n_probe);

}  // namespace msteer
