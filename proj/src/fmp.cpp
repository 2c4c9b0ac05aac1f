#include "msteer/fmp.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msteer/errors.hpp"

namespace msteer {

FeedbackLaw::FeedbackLaw(const Backend& backend, std::shared_ptr<const DualSet> duals, ControlSignal fallback,
                         TieBreak tie)
    : backend_(&backend), duals_(std::move(duals)), fallback_(std::move(fallback)), tie_(std::move(tie)) {
  if (!duals_ || duals_->duals.size() != backend.populations())
    throw ValidationError("feedback.duals", "one dual per population is required");
  if (fallback_.controls() != backend.controls().dim())
    throw DimensionMismatch(backend.controls().dim(), fallback_.controls());
}

Vec FeedbackLaw::value_at(const ControlSignal& u, const TimeGrid& tg, std::size_t node) {
  return u.on_step(tg, std::min(node, tg.steps() - 1));
}

Vec FeedbackLaw::raw(std::size_t node, const ProcessState& state) const {
  const SwitchingVector sigma = backend_->switching(state, *duals_, node);
  const Vec fb = value_at(fallback_, backend_->time_grid(), node);
  return extremal_control(sigma, backend_->controls(), fb, tie_);
}

Vec FeedbackLaw::operator()(std::size_t node, const ProcessState& state) const {
  if (!anchor_) return raw(node, state);
  const Vec ref = value_at(*anchor_, backend_->time_grid(), node);
  if (alpha_ == 1.0) return ref;
  Vec w = raw(node, state);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = alpha_ * ref[k] + (1.0 - alpha_) * w[k];
  return w;
}

FeedbackLaw localized_law(const ControlSignal& reference, const FeedbackLaw& law, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw AlphaOutOfRange(alpha);
  if (reference.controls() != law.backend().controls().dim())
    throw DimensionMismatch(law.backend().controls().dim(), reference.controls());
  FeedbackLaw out = law;
  out.alpha_ = alpha;
  out.anchor_ = reference;
  return out;
}

Program frozen_program(const FeedbackLaw& law) {
  return [law](std::size_t, const ProcessState& frozen, std::size_t node) { return law(node, frozen); };
}

namespace {

void check_value(const Backend& backend, const Vec& u) {
  if (u.size() != backend.controls().dim()) throw DimensionMismatch(backend.controls().dim(), u.size());
  for (double v : u)
    if (!std::isfinite(v)) throw NonFinite("feedback value");
  if (!backend.controls().contains(u, 1e-9)) throw ValidationError("feedback", "value outside the control set");
}

SampledArc finish(const Backend& backend, ControlSignal control, std::vector<ProcessState> arc) {
  const ProcessState& last = arc.back();
  const double cost = backend.cost(last);
  std::vector<double> loss = backend.mass_loss(last);
  return SampledArc{std::move(control), std::move(arc), cost, std::move(loss)};
}

}  // namespace

SampledArc sample_u_feedback(const Backend& backend, const Feedback& law, const Partition& pi) {
  const TimeGrid& tg = backend.time_grid();
  const std::vector<std::size_t> nodes = pi.grid_nodes(tg);
  ProcessState state = backend.initial_state();
  std::vector<ProcessState> arc{state};
  std::vector<Vec> values;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    Vec u = law(nodes[k], state);
    check_value(backend, u);
    backend.advance(state, u, nodes[k], nodes[k + 1]);
    arc.push_back(state);
    values.push_back(std::move(u));
  }
  return finish(backend, ControlSignal(pi, std::move(values)), std::move(arc));
}

SampledArc sample_ou_feedback(const Backend& backend, const Program& program, const Partition& pi) {
  const TimeGrid& tg = backend.time_grid();
  const std::vector<std::size_t> nodes = pi.grid_nodes(tg);
  ProcessState state = backend.initial_state();
  std::vector<ProcessState> arc{state};
  std::vector<double> times{tg.time(nodes.front())};
  std::vector<Vec> values;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const ProcessState frozen = state;
    std::vector<Vec> steps;
    for (std::size_t n = nodes[k]; n < nodes[k + 1]; ++n) {
      steps.push_back(program(nodes[k], frozen, n));
      check_value(backend, steps.back());
    }
    std::size_t run = 0;
    while (run < steps.size()) {
      std::size_t end = run + 1;
      while (end < steps.size() && steps[end] == steps[run]) ++end;
      backend.advance(state, steps[run], nodes[k] + run, nodes[k] + end);
      times.push_back(tg.time(nodes[k] + end));
      values.push_back(steps[run]);
      run = end;
    }
    arc.push_back(state);
  }
  return finish(backend, ControlSignal(Partition(std::move(times)), std::move(values)), std::move(arc));
}

std::vector<double> FmpReport::accepted_costs() const {
  std::vector<double> out;
  for (const auto& it : iterates)
    if (it.accepted) out.push_back(it.cost);
  return out;
}

namespace {

double improvement_threshold(std::optional<double> eps1, double cost) {
  return eps1.value_or(1e-8 * (1.0 + std::abs(cost)));
}

SampledArc run_trial(const Backend& backend, const std::shared_ptr<const DualSet>& duals,
                     const ControlSignal& reference, double alpha, TieBreak tie, SamplingScheme scheme,
                     const Partition& pi) {
  FeedbackLaw law(backend, duals, reference, std::move(tie));
  if (alpha != 0.0) law = localized_law(reference, law, alpha);
  return scheme == SamplingScheme::U ? sample_u_feedback(backend, law, pi)
                                     : sample_ou_feedback(backend, frozen_program(law), pi);
}

NodeSet dual_nodes(const TimeGrid& tg, const std::vector<Partition>& partitions, bool every_node) {
  if (every_node) return {};
  std::set<std::size_t> nodes;
  for (const auto& p : partitions)
    for (std::size_t n : p.grid_nodes(tg)) nodes.insert(n);
  return NodeSet(nodes.begin(), nodes.end());
}

}  // namespace

FmpReport fmp_iterate(const Backend& backend, const ControlSignal& initial, const FmpParams& params) {
  const TimeGrid& tg = backend.time_grid();
  if (!initial.within(backend.controls())) throw ValidationError("controls.initial", "outside the control set");
  if (params.alphas.empty() || params.explores.empty())
    throw ValidationError("algorithm", "the alpha and explore schedules must be nonempty");
  for (double a : params.alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw AlphaOutOfRange(a);
  if (params.initial_intervals == 0) throw ValidationError("algorithm.partition", "must be positive");

  std::vector<Partition> levels{Partition::uniform_on_grid(tg, params.initial_intervals)};
  const double eps2 = params.eps2.value_or(levels.front().diam() / 4.0);
  while (levels.back().diam() >= eps2) {
    Partition next = levels.back().refined(tg);
    if (next == levels.back()) break;
    levels.push_back(std::move(next));
  }
  const NodeSet keep = dual_nodes(tg, levels, params.scheme == SamplingScheme::OU);

  std::vector<std::pair<double, int>> schedule;
  for (double a : params.alphas)
    for (int e : params.explores) schedule.emplace_back(a, e);

  ControlSignal reference = initial;
  ProcessState state = backend.simulate(reference);
  double cost = backend.cost(state);
  FmpReport report{cost, cost, reference, state, {}, {}, false};
  auto duals = std::make_shared<const DualSet>(backend.solve_duals(reference, keep));

  std::size_t sched = 0, level = 0;
  bool last_accepted = false;
  double last_delta = 0.0;
  double best_violation = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 1; iter <= params.max_outer; ++iter) {
    const auto [alpha, explore] = schedule[sched];
    SampledArc arc = run_trial(backend, duals, reference, alpha, TieBreak{params.eps_tie, {explore}},
                               params.scheme, levels[level]);
    const double delta = arc.cost - cost;
    const bool accepted = delta < -improvement_threshold(params.eps1, cost);
    report.iterates.push_back(
        FmpIterate{iter, accepted, arc.cost, alpha, explore, levels[level].diam(), arc.mass_loss, arc.control});
    last_accepted = accepted;
    last_delta = delta;
    if (accepted) {
      reference = std::move(arc.control);
      cost = arc.cost;
      state = std::move(arc.arc.back());
      duals = std::make_shared<const DualSet>(backend.solve_duals(reference, keep));
      sched = level = 0;
      best_violation = std::numeric_limits<double>::infinity();
      continue;
    }
    best_violation = std::min(best_violation, delta);
    if (level + 1 < levels.size()) {
      ++level;
    } else {
      level = 0;
      if (++sched == schedule.size()) {
        report.schedule_exhausted = true;
        break;
      }
    }
  }
  report.cost = cost;
  report.control = std::move(reference);
  report.final_state = std::move(state);
  // A run ending on an acceptance never tested its final reference.
  report.qualification = Qualification{!last_accepted, last_accepted ? last_delta : best_violation};
  return report;
}

QualificationResult qualification_check(const Backend& backend, const ControlSignal& reference,
                                        const std::vector<FeedbackTrial>& trials, std::optional<double> eps1,
                                        std::optional<double> eps_tie) {
  if (trials.empty()) throw ValidationError("trials", "at least one trial is required");
  const TimeGrid& tg = backend.time_grid();
  std::vector<Partition> parts;
  bool every_node = false;
  for (const auto& t : trials) {
    parts.push_back(t.partition);
    every_node = every_node || t.scheme == SamplingScheme::OU;
  }
  auto duals = std::make_shared<const DualSet>(backend.solve_duals(reference, dual_nodes(tg, parts, every_node)));
  QualificationResult out;
  out.reference_cost = backend.cost(backend.simulate(reference));
  const double threshold = improvement_threshold(eps1, out.reference_cost);
  for (const auto& t : trials) {
    const SampledArc arc =
        run_trial(backend, duals, reference, t.alpha, TieBreak{eps_tie, t.explore}, t.scheme, t.partition);
    if (arc.cost - out.reference_cost < -threshold) out.witnesses.push_back({t.id, t.partition, arc.cost});
  }
  out.holds = out.witnesses.empty();
  return out;
}

}  // namespace msteer
