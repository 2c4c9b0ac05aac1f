#include "msteer/transport.hpp"

#include <algorithm>
#include <cmath>

#include "msteer/errors.hpp"

namespace msteer {

namespace {

constexpr double kCflSlack = 1e-12;

inline double pos(double x) { return x > 0.0 ? x : 0.0; }
inline double neg(double x) { return x < 0.0 ? x : 0.0; }

// One donor-cell step, `out` and `rho` must not alias.
void donor_cell(const GridSpec& g, const std::vector<double>& rho, const FaceVelocity& w, double tau,
                std::vector<double>& out) {
  const std::size_t na = g.na(), nb = g.nb();
  const double ra = tau / g.h(0), rb = tau / g.h(1);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double wl = w.at_a(i, j), wr = w.at_a(i + 1, j);
      const double wd = w.at_b(i, j), wu = w.at_b(i, j + 1);
      const double left = i > 0 ? rho[g.index(i - 1, j)] : 0.0;
      const double right = i + 1 < na ? rho[g.index(i + 1, j)] : 0.0;
      const double down = j > 0 ? rho[g.index(i, j - 1)] : 0.0;
      const double up = j + 1 < nb ? rho[g.index(i, j + 1)] : 0.0;
      const double keep = std::max(0.0, 1.0 - ra * (pos(wr) - neg(wl)) - rb * (pos(wu) - neg(wd)));
      const double inflow = ra * (pos(wl) * left - neg(wr) * right) + rb * (pos(wd) * down - neg(wu) * up);
      out[g.index(i, j)] = rho[g.index(i, j)] * keep + inflow;
    }
  }
}

double dual_cfl(const GridSpec& g, const GridVectorField& w, double tau) {
  double c = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    c = std::max(c, std::abs(w.a.values[k]) / g.h(0) + std::abs(w.b.values[k]) / g.h(1));
  return c * tau;
}

// p ← p + τ (w·∇p) with upwind one-sided differences, `out` and `p` must not alias.
void dual_upwind(const GridSpec& g, const std::vector<double>& p, const GridVectorField& w, double tau,
                 std::vector<double>& out) {
  const std::size_t na = g.na(), nb = g.nb();
  const double ha = g.h(0), hb = g.h(1);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t k = g.index(i, j);
      const double wa = w.a.values[k], wb = w.b.values[k];
      double da = 0.0, db = 0.0;
      if (wa > 0.0) {
        da = i + 1 < na ? p[g.index(i + 1, j)] - p[k] : p[k] - p[g.index(i - 1, j)];
      } else if (wa < 0.0) {
        da = i > 0 ? p[k] - p[g.index(i - 1, j)] : p[g.index(i + 1, j)] - p[k];
      }
      if (wb > 0.0) {
        db = j + 1 < nb ? p[g.index(i, j + 1)] - p[k] : p[k] - p[g.index(i, j - 1)];
      } else if (wb < 0.0) {
        db = j > 0 ? p[k] - p[g.index(i, j - 1)] : p[g.index(i, j + 1)] - p[k];
      }
      out[k] = p[k] + tau * (wa * da / ha + wb * db / hb);
    }
  }
}

std::size_t substeps_for(double cfl) {
  std::size_t s = 1;
  while (cfl / static_cast<double>(s) > 1.0 + kCflSlack) {
    s *= 2;
    if (s > kMaxSubsteps) throw CflViolation(cfl / static_cast<double>(kMaxSubsteps), 1.0);
  }
  return s;
}

void forward_step(const GridSpec& g, std::vector<double>& rho, std::vector<double>& scratch,
                  const FaceVelocity& w, double tau, std::size_t& max_substeps) {
  const std::size_t s = substeps_for(cfl_number(w, tau));
  max_substeps = std::max(max_substeps, s);
  const double dt = tau / static_cast<double>(s);
  for (std::size_t r = 0; r < s; ++r) {
    donor_cell(g, rho, w, dt, scratch);
    rho.swap(scratch);
  }
}

bool keeps(const NodeSet& keep, std::size_t node) {
  return keep.empty() || std::binary_search(keep.begin(), keep.end(), node);
}

void check_keep(const NodeSet& keep, const TimeGrid& tg) {
  if (!std::is_sorted(keep.begin(), keep.end()))
    throw ValidationError("keep", "node set must be sorted");
  if (!keep.empty() && keep.back() > tg.steps())
    throw ValidationError("keep", "node index beyond the time grid");
}

template <class Frames>
std::size_t frame_index(const std::vector<std::size_t>& nodes, const Frames&, std::size_t node) {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
  if (it == nodes.end() || *it != node)
    throw ValidationError("frame", "time node " + std::to_string(node) + " was not stored");
  return static_cast<std::size_t>(it - nodes.begin());
}

}  // namespace

double cfl_number(const FaceVelocity& w, double tau) {
  const GridSpec& g = w.spec;
  const double ia = 1.0 / g.h(0), ib = 1.0 / g.h(1);
  double c = 0.0;
  for (std::size_t i = 0; i < g.na(); ++i) {
    for (std::size_t j = 0; j < g.nb(); ++j) {
      const double out = (pos(w.at_a(i + 1, j)) - neg(w.at_a(i, j))) * ia +
                         (pos(w.at_b(i, j + 1)) - neg(w.at_b(i, j))) * ib;
      c = std::max(c, out);
    }
  }
  return c * tau;
}

GridMeasure advance_density(const GridMeasure& rho, const FaceVelocity& w, double tau) {
  if (!(w.spec == rho.spec())) throw IncompatibleGrids();
  if (!(tau > 0.0)) throw ValidationError("tau", "time step must be positive");
  const double c = cfl_number(w, tau);
  if (c > 1.0 + kCflSlack) throw CflViolation(c, 1.0);
  std::vector<double> out(rho.density().size());
  donor_cell(rho.spec(), rho.density(), w, tau, out);
  return GridMeasure(rho.spec(), std::move(out));
}

GridFamily::GridFamily(const ControlFamily& cf, const GridSpec& spec)
    : family_(cf),
      spec_(spec),
      face_drift_(spec),
      center_drift_{GridField(spec), GridField(spec)} {
  if (cf.dim() != 2) throw DimensionMismatch(2, cf.dim());
  auto sample = [&](const VectorField& f, FaceVelocity& faces, GridVectorField& centers) {
    double x[2], v[2];
    for (std::size_t i = 0; i <= spec.na(); ++i) {
      for (std::size_t j = 0; j < spec.nb(); ++j) {
        x[0] = spec.face(0, i);
        x[1] = spec.center_b(j);
        f.eval(x, v);
        faces.at_a(i, j) = v[0];
      }
    }
    for (std::size_t i = 0; i < spec.na(); ++i) {
      for (std::size_t j = 0; j <= spec.nb(); ++j) {
        x[0] = spec.center_a(i);
        x[1] = spec.face(1, j);
        f.eval(x, v);
        faces.at_b(i, j) = v[1];
      }
    }
    for (std::size_t i = 0; i < spec.na(); ++i) {
      for (std::size_t j = 0; j < spec.nb(); ++j) {
        x[0] = spec.center_a(i);
        x[1] = spec.center_b(j);
        f.eval(x, v);
        centers.a.at(i, j) = v[0];
        centers.b.at(i, j) = v[1];
      }
    }
    for (double s : faces.a)
      if (!std::isfinite(s)) throw NonFinite("vector field on grid faces");
    for (double s : faces.b)
      if (!std::isfinite(s)) throw NonFinite("vector field on grid faces");
  };
  sample(cf.drift, face_drift_, center_drift_);
  for (const auto& f : cf.basis) {
    face_basis_.emplace_back(spec);
    center_basis_.push_back({GridField(spec), GridField(spec)});
    sample(f, face_basis_.back(), center_basis_.back());
  }
}

void GridFamily::face_velocity(std::span<const double> u, FaceVelocity& out) const {
  if (u.size() != controls()) throw DimensionMismatch(controls(), u.size());
  out.a = face_drift_.a;
  out.b = face_drift_.b;
  for (std::size_t k = 0; k < controls(); ++k) {
    const double uk = u[k];
    if (uk == 0.0) continue;
    const auto& fa = face_basis_[k].a;
    const auto& fb = face_basis_[k].b;
    for (std::size_t n = 0; n < fa.size(); ++n) out.a[n] += uk * fa[n];
    for (std::size_t n = 0; n < fb.size(); ++n) out.b[n] += uk * fb[n];
  }
}

void GridFamily::center_velocity(std::span<const double> u, GridVectorField& out) const {
  if (u.size() != controls()) throw DimensionMismatch(controls(), u.size());
  out.a.values = center_drift_.a.values;
  out.b.values = center_drift_.b.values;
  for (std::size_t k = 0; k < controls(); ++k) {
    const double uk = u[k];
    if (uk == 0.0) continue;
    const auto& fa = center_basis_[k].a.values;
    const auto& fb = center_basis_[k].b.values;
    for (std::size_t n = 0; n < fa.size(); ++n) out.a.values[n] += uk * fa[n];
    for (std::size_t n = 0; n < fb.size(); ++n) out.b.values[n] += uk * fb[n];
  }
}

NodeSet strided_nodes(const TimeGrid& tg, std::size_t stride) {
  if (stride == 0) throw ValidationError("stride", "must be positive");
  NodeSet out;
  for (std::size_t n = 0; n < tg.steps(); n += stride) out.push_back(n);
  out.push_back(tg.steps());
  return out;
}

bool DensityTrajectory::has(std::size_t node) const {
  return std::binary_search(nodes.begin(), nodes.end(), node);
}

const GridMeasure& DensityTrajectory::at(std::size_t node) const {
  return frames[frame_index(nodes, frames, node)];
}

bool DualState::has(std::size_t node) const { return std::binary_search(nodes.begin(), nodes.end(), node); }

const GridField& DualState::at(std::size_t node) const { return frames[frame_index(nodes, frames, node)]; }

GridMeasure advance_steps(const GridMeasure& rho, const GridFamily& fam, std::span<const double> u,
                          const TimeGrid& tg, std::size_t from, std::size_t to, std::size_t* max_substeps) {
  if (!(rho.spec() == fam.spec())) throw IncompatibleGrids();
  if (from > to || to > tg.steps()) throw ValidationError("steps", "invalid step range");
  std::vector<double> d = rho.density(), scratch(d.size());
  FaceVelocity w(fam.spec());
  fam.face_velocity(u, w);
  std::size_t used = 1;
  for (std::size_t k = from; k < to; ++k) forward_step(fam.spec(), d, scratch, w, tg.tau(), used);
  if (max_substeps) *max_substeps = std::max(*max_substeps, used);
  return GridMeasure(fam.spec(), std::move(d));
}

DensityTrajectory solve_forward(const GridMeasure& initial, const GridFamily& fam, const ControlSignal& u,
                                const TimeGrid& tg, const NodeSet& keep) {
  if (!(initial.spec() == fam.spec())) throw IncompatibleGrids();
  check_keep(keep, tg);
  DensityTrajectory traj{tg, {}, {}, 0.0, 1};
  std::vector<double> d = initial.density(), scratch(d.size());
  FaceVelocity w(fam.spec());
  if (keeps(keep, 0)) {
    traj.nodes.push_back(0);
    traj.frames.push_back(initial);
  }
  for (std::size_t k = 0; k < tg.steps(); ++k) {
    fam.face_velocity(u.on_step(tg, k), w);
    forward_step(fam.spec(), d, scratch, w, tg.tau(), traj.max_substeps);
    if (keeps(keep, k + 1) || k + 1 == tg.steps()) {
      traj.nodes.push_back(k + 1);
      traj.frames.emplace_back(fam.spec(), d);
    }
  }
  traj.mass_loss = initial.mass() - traj.frames.back().mass();
  return traj;
}

DensityTrajectory solve_forward(const GridMeasure& initial, const ControlFamily& cf, const ControlSignal& u,
                                const TimeGrid& tg, const NodeSet& keep) {
  return solve_forward(initial, GridFamily(cf, initial.spec()), u, tg, keep);
}

DualState solve_dual_backward(const GridField& terminal_cost, const GridFamily& fam, const ControlSignal& u,
                              const TimeGrid& tg, const NodeSet& keep) {
  if (!(terminal_cost.spec == fam.spec())) throw IncompatibleGrids();
  check_keep(keep, tg);
  const GridSpec& g = fam.spec();
  if (g.na() < 2 || g.nb() < 2) throw GridTooSmall();
  DualState dual{tg, {}, {}, 1};
  std::vector<double> p(terminal_cost.values.size()), scratch(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = -terminal_cost.values[k];

  std::vector<std::size_t> nodes;
  std::vector<GridField> frames;
  if (keeps(keep, tg.steps())) {
    nodes.push_back(tg.steps());
    frames.emplace_back(g, p);
  }
  GridVectorField w{GridField(g), GridField(g)};
  for (std::size_t k = tg.steps(); k-- > 0;) {
    fam.center_velocity(u.on_step(tg, k), w);
    const std::size_t s = substeps_for(dual_cfl(g, w, tg.tau()));
    dual.max_substeps = std::max(dual.max_substeps, s);
    const double dt = tg.tau() / static_cast<double>(s);
    for (std::size_t r = 0; r < s; ++r) {
      dual_upwind(g, p, w, dt, scratch);
      p.swap(scratch);
    }
    if (keeps(keep, k) || k == 0) {
      nodes.push_back(k);
      frames.emplace_back(g, p);
    }
  }
  for (double v : p)
    if (!std::isfinite(v)) throw NonFinite("dual state");
  dual.nodes.assign(nodes.rbegin(), nodes.rend());
  dual.frames.assign(std::make_move_iterator(frames.rbegin()), std::make_move_iterator(frames.rend()));
  return dual;
}

DualState solve_dual_backward(const GridField& terminal_cost, const ControlFamily& cf, const ControlSignal& u,
                              const TimeGrid& tg, const NodeSet& keep) {
  return solve_dual_backward(terminal_cost, GridFamily(cf, terminal_cost.spec), u, tg, keep);
}

GridVectorField gradient_field(const GridField& p) {
  const GridSpec& g = p.spec;
  if (g.na() < 3 || g.nb() < 3) throw GridTooSmall();
  GridVectorField out{GridField(g), GridField(g)};
  const std::size_t na = g.na(), nb = g.nb();
  const double ha = g.h(0), hb = g.h(1);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      double da;
      if (i == 0)
        da = (-3.0 * p.at(0, j) + 4.0 * p.at(1, j) - p.at(2, j)) / (2.0 * ha);
      else if (i + 1 == na)
        da = (3.0 * p.at(i, j) - 4.0 * p.at(i - 1, j) + p.at(i - 2, j)) / (2.0 * ha);
      else
        da = (p.at(i + 1, j) - p.at(i - 1, j)) / (2.0 * ha);
      double db;
      if (j == 0)
        db = (-3.0 * p.at(i, 0) + 4.0 * p.at(i, 1) - p.at(i, 2)) / (2.0 * hb);
      else if (j + 1 == nb)
        db = (3.0 * p.at(i, j) - 4.0 * p.at(i, j - 1) + p.at(i, j - 2)) / (2.0 * hb);
      else
        db = (p.at(i, j + 1) - p.at(i, j - 1)) / (2.0 * hb);
      out.a.at(i, j) = da;
      out.b.at(i, j) = db;
    }
  }
  return out;
}

}  // namespace msteer
