#include "msteer/fields.hpp"

#include <algorithm>
#include <cmath>

#include "msteer/errors.hpp"

namespace msteer {

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double radical_inverse(std::size_t index, std::size_t base) {
  double result = 0.0, f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

}  // namespace

VectorField::VectorField(std::size_t dim, Fn f, JacobianFn jacobian, std::string description)
    : dim_(dim), f_(std::move(f)), jacobian_(std::move(jacobian)), description_(std::move(description)) {
  if (dim_ == 0) throw ValidationError("field", "zero-dimensional vector field");
  if (!f_) throw ValidationError("field", "missing evaluator");
}

VectorField VectorField::from_expr(const FieldExpr& e) {
  const std::size_t n = e.dim();
  if (e.arity() > n)
    throw ValidationError("field", "expression references x" + std::to_string(e.arity()) +
                                       " but the field has " + std::to_string(n) + " components");
  return VectorField(
      n, [e](std::span<const double> x, std::span<double> out) { e.eval(x, out); }, {}, e.to_string());
}

VectorField VectorField::constant(Vec value) {
  const std::size_t n = value.size();
  bool all_zero = true;
  for (double v : value) all_zero = all_zero && v == 0.0;
  std::string desc = "(";
  for (std::size_t k = 0; k < n; ++k) desc += (k ? ", " : "") + std::to_string(value[k]);
  VectorField vf(
      n, [value](std::span<const double>, std::span<double> out) { std::copy(value.begin(), value.end(), out.begin()); },
      [n](std::span<const double>, std::span<double> jac) { std::fill(jac.begin(), jac.begin() + n * n, 0.0); },
      desc + ")");
  vf.zero_ = all_zero;
  return vf;
}

VectorField VectorField::zero(std::size_t dim) { return constant(Vec(dim, 0.0)); }

Vec VectorField::operator()(std::span<const double> x) const {
  if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
  Vec out(dim_);
  f_(x, out);
  return out;
}

void VectorField::jacobian(std::span<const double> x, std::span<double> jac) const {
  if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
  if (jac.size() < dim_ * dim_) throw DimensionMismatch(dim_ * dim_, jac.size());
  if (jacobian_) {
    jacobian_(x, jac);
    return;
  }
  const double step = 1e-6 * (1.0 + norm(x));
  Vec probe(x.begin(), x.end()), fp(dim_), fm(dim_);
  for (std::size_t c = 0; c < dim_; ++c) {
    probe[c] = x[c] + step;
    f_(probe, fp);
    probe[c] = x[c] - step;
    f_(probe, fm);
    probe[c] = x[c];
    for (std::size_t r = 0; r < dim_; ++r) jac[r * dim_ + c] = (fp[r] - fm[r]) / (2.0 * step);
  }
}

ScalarField::ScalarField(Fn f, std::string description) : f_(std::move(f)), description_(std::move(description)) {
  if (!f_) throw ValidationError("cost", "missing evaluator");
}

ScalarField ScalarField::from_expr(const ScalarExpr& e) {
  return ScalarField([e](std::span<const double> x) { return e(x); }, e.to_string());
}

ScalarField ScalarField::squared_distance(Vec target) {
  std::string desc = "|x - (";
  for (std::size_t k = 0; k < target.size(); ++k) desc += (k ? ", " : "") + std::to_string(target[k]);
  return ScalarField(
      [target](std::span<const double> x) {
        if (x.size() != target.size()) throw DimensionMismatch(target.size(), x.size());
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - target[k]) * (x[k] - target[k]);
        return s;
      },
      desc + ")|^2");
}

ScalarField ScalarField::zero() {
  return ScalarField([](std::span<const double>) { return 0.0; }, "0");
}

ControlSet::ControlSet(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw DimensionMismatch(lo_.size(), hi_.size());
  if (lo_.empty()) throw ValidationError("controls", "control set must have at least one component");
  for (std::size_t k = 0; k < lo_.size(); ++k) {
    if (!std::isfinite(lo_[k]) || !std::isfinite(hi_[k]))
      throw ValidationError("controls", "bounds must be finite (U is compact)");
    if (lo_[k] > hi_[k]) throw ValidationError("controls", "lower bound exceeds upper bound");
  }
}

ControlSet ControlSet::symmetric(std::size_t m, double bound) {
  return ControlSet(Vec(m, -bound), Vec(m, bound));
}

bool ControlSet::contains(std::span<const double> u, double tol) const {
  if (u.size() != dim()) return false;
  for (std::size_t k = 0; k < u.size(); ++k)
    if (!(u[k] >= lo_[k] - tol && u[k] <= hi_[k] + tol)) return false;
  return true;
}

double ControlSet::support(std::span<const double> sigma) const {
  if (sigma.size() != dim()) throw DimensionMismatch(dim(), sigma.size());
  double s = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) s += std::max(sigma[k] * lo_[k], sigma[k] * hi_[k]);
  return s;
}

std::vector<Vec> ControlSet::vertices() const {
  const std::size_t m = dim();
  if (m > 20) throw TooLarge(m, 20);
  std::vector<Vec> out;
  out.reserve(std::size_t{1} << m);
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    Vec v(m);
    for (std::size_t k = 0; k < m; ++k) v[k] = (mask >> k & 1u) ? hi_[k] : lo_[k];
    out.push_back(std::move(v));
  }
  return out;
}

ControlFamily::ControlFamily(VectorField d, std::vector<VectorField> b)
    : drift(std::move(d)), basis(std::move(b)) {
  if (basis.empty()) throw ValidationError("controls.basis", "at least one basis field is required");
  for (const auto& f : basis)
    if (f.dim() != drift.dim()) throw DimensionMismatch(drift.dim(), f.dim());
}

void eval_controlled(const ControlFamily& cf, std::span<const double> u, std::span<const double> x,
                     std::span<double> out) {
  if (u.size() != cf.controls()) throw DimensionMismatch(cf.controls(), u.size());
  if (x.size() != cf.dim()) throw DimensionMismatch(cf.dim(), x.size());
  cf.drift.eval(x, out);
  double buf[16];
  Vec heap;
  std::span<double> tmp;
  if (cf.dim() <= 16) {
    tmp = std::span<double>(buf, cf.dim());
  } else {
    heap.resize(cf.dim());
    tmp = heap;
  }
  for (std::size_t k = 0; k < cf.controls(); ++k) {
    if (u[k] == 0.0) continue;
    cf.basis[k].eval(x, tmp);
    for (std::size_t r = 0; r < cf.dim(); ++r) out[r] += u[k] * tmp[r];
  }
}

Vec eval_controlled(const ControlFamily& cf, std::span<const double> u, std::span<const double> x) {
  Vec out(cf.dim());
  eval_controlled(cf, u, x, out);
  return out;
}

std::vector<Vec> h1_probes(const GridSpec& spec, std::size_t n_probe) {
  const auto& lo = spec.domain_min();
  const auto& hi = spec.domain_max();
  const double ma = 0.5 * (lo[0] + hi[0]), mb = 0.5 * (lo[1] + hi[1]);
  std::vector<Vec> probes = {{ma, mb},     {lo[0], lo[1]}, {hi[0], lo[1]}, {lo[0], hi[1]}, {hi[0], hi[1]},
                             {lo[0], mb},  {hi[0], mb},    {ma, lo[1]},    {ma, hi[1]}};
  if (n_probe < probes.size()) probes.resize(n_probe);
  for (std::size_t k = 1; probes.size() < n_probe; ++k)
    probes.push_back({lo[0] + (hi[0] - lo[0]) * radical_inverse(k, 2),
                      lo[1] + (hi[1] - lo[1]) * radical_inverse(k, 3)});
  return probes;
}

H1Constants validate_h1(const VectorField& vf, const GridSpec& spec, std::size_t n_probe) {
  if (n_probe < 2) throw ValidationError("n_probe", "need at least two probe points");
  if (vf.dim() != 2) throw DimensionMismatch(2, vf.dim());
  const auto probes = h1_probes(spec, n_probe);
  std::vector<Vec> values;
  values.reserve(probes.size());
  H1Constants c{0.0, 0.0};
  for (const auto& p : probes) {
    Vec v = vf(p);
    for (double x : v)
      if (!std::isfinite(x)) throw NonFinite("vector field at probe point");
    c.growth = std::max(c.growth, norm(v) / (1.0 + norm(p)));
    values.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = i + 1; j < probes.size(); ++j) {
      const double dx = std::hypot(probes[i][0] - probes[j][0], probes[i][1] - probes[j][1]);
      if (dx == 0.0) continue;
      const double df = std::hypot(values[i][0] - values[j][0], values[i][1] - values[j][1]);
      c.lipschitz = std::max(c.lipschitz, df / dx);
    }
  }
  return c;
}

}  // namespace msteer
