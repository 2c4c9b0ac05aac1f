#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msteer/backend.hpp"
#include "msteer/control.hpp"
#include "msteer/pmp.hpp"

namespace msteer {

/// Extremal ensemble feedback: at each node, the bang-bang maximizer of σ computed from the
/// reference duals against the current measures. With α > 0 the output is blended toward a
/// reference control.
class FeedbackLaw {
 public:
  FeedbackLaw(const Backend& backend, std::shared_ptr<const DualSet> duals, ControlSignal fallback,
              TieBreak tie = {});

  /// Extremal selection, ties resolved by the fallback control (or the explore override).
  Vec raw(std::size_t node, const ProcessState& state) const;
  Vec operator()(std::size_t node, const ProcessState& state) const;

  double alpha() const { return alpha_; }
  const ControlSignal& fallback() const { return fallback_; }
  const Backend& backend() const { return *backend_; }

 private:
  friend FeedbackLaw localized_law(const ControlSignal& reference, const FeedbackLaw& law, double alpha);

  static Vec value_at(const ControlSignal& u, const TimeGrid& tg, std::size_t node);

  const Backend* backend_;
  std::shared_ptr<const DualSet> duals_;
  ControlSignal fallback_;
  TieBreak tie_;
  double alpha_ = 0.0;
  std::optional<ControlSignal> anchor_;
};

/// ω = α ū + (1 − α) w.
FeedbackLaw localized_law(const ControlSignal& reference, const FeedbackLaw& law, double alpha);

/// Ensemble feedback: control for the step starting at `node` given the current state.
using Feedback = std::function<Vec(std::size_t node, const ProcessState& state)>;
/// Short-term program: control for fine step `node` given the state frozen at `start`.
using Program = std::function<Vec(std::size_t start, const ProcessState& frozen, std::size_t node)>;

/// Re-selects the law at every fine node against the frozen state.
Program frozen_program(const FeedbackLaw& law);

struct SampledArc {
  ControlSignal control;
  std::vector<ProcessState> arc;  // states at the partition nodes
  double cost = 0.0;
  std::vector<double> mass_loss;
};

/// Holds the feedback value taken at t_{k-1} over each interval [t_{k-1}, t_k).
SampledArc sample_u_feedback(const Backend& backend, const Feedback& law, const Partition& pi);
/// Runs the program over each interval; consecutive equal values inside an interval are merged.
SampledArc sample_ou_feedback(const Backend& backend, const Program& program, const Partition& pi);

enum class SamplingScheme { U, OU };

struct FmpParams {
  std::optional<double> eps1;  // default 1e-8 (1 + |I[ū]|)
  std::optional<double> eps2;  // default diam(π₀) / 4
  std::vector<double> alphas{0.75, 0.5, 0.25, 0.0};
  std::vector<int> explores{+1, -1};
  std::size_t max_outer = 30;
  std::size_t initial_intervals = 20;
  SamplingScheme scheme = SamplingScheme::U;
  std::optional<double> eps_tie;
};

struct FmpIterate {
  std::size_t iteration = 0;
  bool accepted = false;
  double cost = 0.0;
  double alpha = 0.0;
  int explore = 0;
  double diam = 0.0;
  std::vector<double> mass_loss;
  ControlSignal control;
};

struct Qualification {
  /// No feedback tried against the final reference improved it.
  bool holds = true;
  /// Smallest I[trial] − I[ū] over those trials (+inf when none ran).
  double best_violation = std::numeric_limits<double>::infinity();
};

struct FmpReport {
  double initial_cost = 0.0;
  double cost = 0.0;
  ControlSignal control;
  ProcessState final_state;
  std::vector<FmpIterate> iterates;
  Qualification qualification;
  bool schedule_exhausted = false;

  std::vector<double> accepted_costs() const;
};

FmpReport fmp_iterate(const Backend& backend, const ControlSignal& initial, const FmpParams& params = {});

/// One feedback to try against a reference process. α = 1 reproduces the reference.
struct FeedbackTrial {
  std::string id;
  Partition partition;
  double alpha = 0.0;
  std::vector<int> explore;
  SamplingScheme scheme = SamplingScheme::U;
};

struct Witness {
  std::string id;
  Partition partition;
  double cost;
};

struct QualificationResult {
  bool holds = true;
  double reference_cost = 0.0;
  std::vector<Witness> witnesses;
};

/// Finite-trial refutation of optimality: every trial beating I[ū] by more than ε₁ is a witness.
QualificationResult qualification_check(const Backend& backend, const ControlSignal& reference,
                                        const std::vector<FeedbackTrial>& trials,
                                        std::optional<double> eps1 = std::nullopt,
                                        std::optional<double> eps_tie = std::nullopt);

}  // namespace msteer
