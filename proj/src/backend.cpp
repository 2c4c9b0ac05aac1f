#include "msteer/backend.hpp"

#include <algorithm>

#include "msteer/errors.hpp"

namespace msteer {

void Problem::validate() const {
  if (basis.empty()) throw ValidationError("controls.basis", "at least one basis field is required");
  if (basis.size() != controls.dim()) throw DimensionMismatch(basis.size(), controls.dim());
  for (const auto& f : basis)
    if (f.dim() != 2) throw DimensionMismatch(2, f.dim());
  if (populations.empty() || populations.size() > 2)
    throw ValidationError("populations", "one or two populations are supported");
  for (const auto& p : populations)
    if (p.drift.dim() != 2) throw DimensionMismatch(2, p.drift.dim());
}

Backend::Backend(Problem problem) : problem_(std::move(problem)) {
  problem_.validate();
  for (const auto& pop : problem_.populations) {
    families_.emplace_back(pop.drift, problem_.basis);
    grid_families_.emplace_back(families_.back(), problem_.grid);
    const ScalarField& cost = pop.cost;
    grid_costs_.push_back(sample_on_grid(problem_.grid, [&](double a, double b) {
      const double x[2] = {a, b};
      return cost(x);
    }));
  }
}

ProcessState Backend::simulate(const ControlSignal& u) const {
  ProcessState last;
  rollout(u, {time_grid().steps()}, [&](std::size_t, const ProcessState& s) { last = s; });
  return last;
}

void Backend::rollout(const ControlSignal& u, const NodeSet& nodes,
                      const std::function<void(std::size_t, const ProcessState&)>& visit) const {
  const TimeGrid& tg = time_grid();
  auto wanted = [&](std::size_t n) { return nodes.empty() || std::binary_search(nodes.begin(), nodes.end(), n); };
  ProcessState s = initial_state();
  if (wanted(0)) visit(0, s);
  for (std::size_t n = 0; n < tg.steps(); ++n) {
    advance(s, u.on_step(tg, n), n, n + 1);
    if (wanted(n + 1)) visit(n + 1, s);
  }
}

DualSet Backend::solve_duals(const ControlSignal& u, const NodeSet& keep) const {
  DualSet out;
  for (std::size_t p = 0; p < populations(); ++p)
    out.duals.push_back(solve_dual_backward(grid_costs_[p], grid_families_[p], u, time_grid(), keep));
  return out;
}

// ---------------------------------------------------------------------------------------------

GridBackend::GridBackend(Problem problem) : Backend(std::move(problem)) {
  for (const auto& pop : problem_.populations) {
    if (!pop.grid_initial) throw ValidationError("population.initial", "grid backend needs a grid density");
    if (!(pop.grid_initial->spec() == problem_.grid)) throw IncompatibleGrids();
  }
}

ProcessState GridBackend::initial_state() const {
  ProcessState s;
  for (const auto& pop : problem_.populations) s.populations.emplace_back(*pop.grid_initial);
  return s;
}

void GridBackend::advance(ProcessState& state, std::span<const double> u, std::size_t from, std::size_t to) const {
  for (std::size_t p = 0; p < populations(); ++p) {
    auto& m = std::get<GridMeasure>(state.populations[p]);
    m = advance_steps(m, grid_families_[p], u, time_grid(), from, to);
  }
}

double GridBackend::cost(const ProcessState& state) const {
  double c = 0.0;
  for (std::size_t p = 0; p < populations(); ++p) c += std::get<GridMeasure>(state.populations[p]).integrate(grid_costs_[p]);
  return c;
}

std::vector<double> GridBackend::mass_loss(const ProcessState& state) const {
  std::vector<double> out;
  for (std::size_t p = 0; p < populations(); ++p)
    out.push_back(problem_.populations[p].grid_initial->mass() - std::get<GridMeasure>(state.populations[p]).mass());
  return out;
}

SwitchingVector GridBackend::switching(const ProcessState& state, const DualSet& duals, std::size_t node) const {
  SwitchingVector sigma(controls().dim(), 0.0);
  for (std::size_t p = 0; p < populations(); ++p) {
    const SwitchingVector s =
        switching_vector(duals.duals[p].at(node), std::get<GridMeasure>(state.populations[p]), grid_families_[p]);
    for (std::size_t k = 0; k < sigma.size(); ++k) sigma[k] += s[k];
  }
  return sigma;
}

// ---------------------------------------------------------------------------------------------

ParticleBackend::ParticleBackend(Problem problem, std::size_t steps_per_interval)
    : Backend(std::move(problem)), steps_(steps_per_interval) {
  if (steps_ == 0) throw ValidationError("algorithm.rk4_steps", "must be positive");
  for (const auto& pop : problem_.populations) {
    if (!pop.particle_initial) throw ValidationError("population.initial", "particle backend needs atoms");
    if (pop.particle_initial->dim() != 2) throw DimensionMismatch(2, pop.particle_initial->dim());
  }
}

ProcessState ParticleBackend::initial_state() const {
  ProcessState s;
  for (const auto& pop : problem_.populations) s.populations.emplace_back(*pop.particle_initial);
  return s;
}

void ParticleBackend::advance(ProcessState& state, std::span<const double> u, std::size_t from,
                              std::size_t to) const {
  if (from >= to) return;
  const double t0 = time_grid().time(from), t1 = time_grid().time(to);
  const ControlSignal hold = ControlSignal::constant(t0, t1, Vec(u.begin(), u.end()));
  for (std::size_t p = 0; p < populations(); ++p) {
    auto& m = std::get<EmpiricalMeasure>(state.populations[p]);
    m = pushforward(FlowMap(families_[p], hold, steps_), m, t0, t1);
  }
}

double ParticleBackend::cost(const ProcessState& state) const {
  double c = 0.0;
  for (std::size_t p = 0; p < populations(); ++p)
    c += expected_cost(std::get<EmpiricalMeasure>(state.populations[p]), problem_.populations[p].cost);
  return c;
}

std::vector<double> ParticleBackend::mass_loss(const ProcessState&) const {
  return std::vector<double>(populations(), 0.0);
}

SwitchingVector ParticleBackend::switching(const ProcessState& state, const DualSet& duals, std::size_t node) const {
  SwitchingVector sigma(controls().dim(), 0.0);
  for (std::size_t p = 0; p < populations(); ++p) {
    const SwitchingVector s = switching_vector(gradient_field(duals.duals[p].at(node)),
                                               std::get<EmpiricalMeasure>(state.populations[p]), families_[p]);
    for (std::size_t k = 0; k < sigma.size(); ++k) sigma[k] += s[k];
  }
  return sigma;
}

ProcessState ParticleBackend::simulate(const ControlSignal& u) const {
  ProcessState s = initial_state();
  const double t0 = time_grid().t0(), t1 = time_grid().t_final();
  for (std::size_t p = 0; p < populations(); ++p) {
    auto& m = std::get<EmpiricalMeasure>(s.populations[p]);
    m = pushforward(FlowMap(families_[p], u, steps_), m, t0, t1);
  }
  return s;
}

void ParticleBackend::rollout(const ControlSignal& u, const NodeSet& nodes,
                              const std::function<void(std::size_t, const ProcessState&)>& visit) const {
  const TimeGrid& tg = time_grid();
  auto wanted = [&](std::size_t n) { return nodes.empty() || std::binary_search(nodes.begin(), nodes.end(), n); };
  std::vector<FlowMap> maps;
  for (std::size_t p = 0; p < populations(); ++p) maps.emplace_back(families_[p], u, steps_);
  ProcessState s = initial_state();
  if (wanted(0)) visit(0, s);
  for (std::size_t n = 0; n < tg.steps(); ++n) {
    for (std::size_t p = 0; p < populations(); ++p) {
      auto& m = std::get<EmpiricalMeasure>(s.populations[p]);
      m = pushforward(maps[p], m, tg.time(n), tg.time(n + 1));
    }
    if (wanted(n + 1)) visit(n + 1, s);
  }
}

}  // namespace msteer
