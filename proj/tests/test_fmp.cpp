#include <cmath>

#include "doctest.h"
#include "msteer/errors.hpp"
#include "msteer/fmp.hpp"
#include "support.hpp"

using namespace msteer;
using namespace msteer::testing;

namespace {

// Three controls, constant cost: every σ is a tie, so `explore` alone decides the raw law.
Problem flat_three_control_problem() {
  const GridSpec g({-2, -2}, {2, 2}, {20, 20});
  PopulationSpec pop{VectorField::zero(2), ScalarField::zero(), GridMeasure::point_mass(g, 0, 0),
                     EmpiricalMeasure::dirac({0, 0})};
  return Problem{{VectorField::constant({1, 0}), VectorField::constant({0, 1}), VectorField::constant({0, 0})},
                 ControlSet::symmetric(3, 1.0),
                 TimeGrid(0, 1, 20),
                 g,
                 {pop}};
}

// Drift (0, 1), control moves a, ℓ = a (b − 0.5): against ū ≡ 0 the frozen-measure switching
// function from δ(0,0) is σ(t) = t − 0.5.
Problem switching_problem() {
  const GridSpec g({-3, -3}, {3, 3}, {60, 60});
  PopulationSpec pop{VectorField::constant({0, 1}), ScalarField::from_expr(parse_scalar("a * (b - 0.5)")),
                     GridMeasure::point_mass(g, 0, 0), EmpiricalMeasure::dirac({0, 0})};
  return Problem{{VectorField::constant({1, 0})}, ControlSet::symmetric(1, 1.0), TimeGrid(0, 1, 100), g, {pop}};
}

std::shared_ptr<const DualSet> duals_for(const Backend& be, const ControlSignal& u) {
  return std::make_shared<const DualSet>(be.solve_duals(u));
}

}  // namespace

TEST_CASE("localized_law blending") {
  const Problem p = flat_three_control_problem();
  const ParticleBackend be(p);
  const ControlSignal ref = constant_control(p, {1, 0, 0});
  const FeedbackLaw raw(be, duals_for(be, ref), ref, TieBreak{std::nullopt, {-1, 1, 1}});
  const ProcessState s0 = be.initial_state();
  CHECK(raw(0, s0) == Vec{-1, 1, 1});
  const Vec blended = localized_law(ref, raw, 0.75)(0, s0);
  CHECK(blended[0] == doctest::Approx(0.5));
  CHECK(blended[1] == doctest::Approx(0.25));
  CHECK(blended[2] == doctest::Approx(0.25));
  CHECK(localized_law(ref, raw, 1.0)(7, s0) == Vec{1, 0, 0});
  const ControlSignal same = constant_control(p, {-1, 1, 1});
  CHECK(localized_law(same, raw, 0.5)(3, s0) == Vec{-1, 1, 1});
  CHECK_THROWS_AS(localized_law(ref, raw, 0.0), AlphaOutOfRange);
  CHECK_THROWS_AS(localized_law(ref, raw, 1.5), AlphaOutOfRange);
  CHECK_THROWS_AS(localized_law(ref, raw, NAN), AlphaOutOfRange);
}

TEST_CASE("u-sampling on example 1") {
  const Problem p = example1_problem();
  for (const bool grid : {false, true}) {
    std::unique_ptr<Backend> be;
    if (grid) be = std::make_unique<GridBackend>(p);
    else be = std::make_unique<ParticleBackend>(p);
    const ControlSignal zero = constant_control(p, {0.0});
    const auto duals = duals_for(*be, zero);
    for (const int e : {+1, -1}) {
      const FeedbackLaw law(*be, duals, zero, TieBreak{std::nullopt, {e}});
      for (std::size_t K : {1, 2, 4, 8, 20}) {
        const SampledArc arc = sample_u_feedback(*be, law, Partition::uniform_on_grid(p.time, K));
        for (const Vec& v : arc.control.values()) CHECK(v[0] == e);
        CHECK(arc.arc.size() == K + 1);
        if (grid) CHECK(std::abs(arc.cost + 0.5) <= 3 * p.grid.h(0));
        else CHECK(arc.cost == doctest::Approx(-0.5).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("single-interval sampling is open loop") {
  const Problem p = switching_problem();
  const ParticleBackend be(p);
  const ControlSignal zero = constant_control(p, {0.0});
  const FeedbackLaw law(be, duals_for(be, zero), zero);
  const SampledArc arc = sample_u_feedback(be, law, Partition::uniform_on_grid(p.time, 1));
  REQUIRE(arc.control.values().size() == 1);
  CHECK(arc.control.values()[0] == law(0, be.initial_state()));
  CHECK(arc.control.values()[0] == Vec{-1});
}

TEST_CASE("constant laws reproduce the open-loop solver") {
  const Problem p = example1_problem({0.2, -0.1}, 60, 50);
  const GridBackend grid(p);
  const ParticleBackend parts(p);
  const Feedback constant = [](std::size_t, const ProcessState&) { return Vec{0.7}; };
  const Program program = [](std::size_t, const ProcessState&, std::size_t) { return Vec{0.7}; };
  const Partition pi = Partition::uniform_on_grid(p.time, 5);
  const ControlSignal open = constant_control(p, {0.7});

  const SampledArc g1 = sample_u_feedback(grid, constant, pi);
  CHECK(std::abs(g1.cost - grid.cost(grid.simulate(open))) <= 1e-12);
  const SampledArc p1 = sample_u_feedback(parts, constant, pi);
  CHECK(std::abs(p1.cost - parts.cost(parts.simulate(g1.control))) <= 1e-10);
  CHECK(std::abs(p1.cost - parts.cost(parts.simulate(open))) <= 1e-10);

  const SampledArc g2 = sample_ou_feedback(grid, program, pi);
  const SampledArc p2 = sample_ou_feedback(parts, program, pi);
  CHECK(g2.cost == g1.cost);
  CHECK(p2.cost == p1.cost);
  CHECK(g2.control == g1.control);
  CHECK(p2.control == p1.control);
}

TEST_CASE("piecewise open-loop sampling switches inside the interval") {
  const Problem p = switching_problem();
  const ParticleBackend be(p);
  const ControlSignal zero = constant_control(p, {0.0});
  const FeedbackLaw law(be, duals_for(be, zero), zero);
  const SampledArc ou = sample_ou_feedback(be, frozen_program(law), Partition::uniform_on_grid(p.time, 1));
  const SampledArc u = sample_u_feedback(be, law, Partition::uniform_on_grid(p.time, 1));
  CHECK(u.control.values().size() == 1);
  CHECK(ou.control.at(0.25)[0] == -1.0);
  CHECK(ou.control.at(0.75)[0] == 1.0);
  CHECK(ou.control.values().size() >= 2);
  CHECK(ou.arc.size() == 2);
  // Switch sits at t = 0.5, where σ crosses zero.
  for (std::size_t k = 0; k + 1 < ou.control.partition().nodes().size(); ++k) {
    const double a = ou.control.partition().nodes()[k], b = ou.control.partition().nodes()[k + 1];
    const double v = ou.control.values()[k][0];
    if (b <= 0.5 + 1e-12) CHECK(v <= 0.0);
    if (a >= 0.5 + 1e-12) CHECK(v == 1.0);
  }
}

TEST_CASE("piecewise open-loop sampling on example 1 matches u-sampling") {
  const Problem p = example1_problem();
  const ParticleBackend be(p);
  const ControlSignal zero = constant_control(p, {0.0});
  const FeedbackLaw law(be, duals_for(be, zero), zero, TieBreak{std::nullopt, {+1}});
  const Partition pi = Partition::uniform_on_grid(p.time, 4);
  const SampledArc ou = sample_ou_feedback(be, frozen_program(law), pi);
  const SampledArc u = sample_u_feedback(be, law, pi);
  CHECK(ou.control == u.control);
  CHECK(ou.cost == u.cost);
}

TEST_CASE("fmp_iterate on example 1") {
  const Problem p = example1_problem();
  const ParticleBackend be(p);
  FmpParams params;
  params.alphas = {0.0};
  params.explores = {+1};
  const FmpReport r = fmp_iterate(be, constant_control(p, {0.0}), params);
  REQUIRE(r.accepted_costs().size() == 1);
  CHECK(r.initial_cost == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.cost == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(r.qualification.holds);
  CHECK(r.schedule_exhausted);
  CHECK(r.qualification.best_violation >= -1e-12);
  for (const Vec& v : r.control.values()) CHECK(v == Vec{1.0});
  // One acceptance, then refinements of the initial partition until the floor: T/20 ... T/160.
  CHECK(r.iterates.size() == 5);
  CHECK(r.iterates[1].diam == doctest::Approx(0.05));
  CHECK(r.iterates.back().diam < r.iterates[1].diam / 4 + 1e-12);
}

TEST_CASE("fmp_iterate with a huge threshold accepts nothing") {
  const Problem p = example1_problem();
  const ParticleBackend be(p);
  FmpParams params;
  params.eps1 = 1e6;
  const FmpReport r = fmp_iterate(be, constant_control(p, {0.0}), params);
  CHECK(r.accepted_costs().empty());
  CHECK(r.qualification.holds);
  CHECK(r.control.values().front() == Vec{0.0});
}

TEST_CASE("fmp_iterate honours max_outer") {
  const Problem p = example1_problem();
  const ParticleBackend be(p);
  FmpParams params;
  params.max_outer = 3;
  params.eps1 = 1e6;
  const FmpReport r = fmp_iterate(be, constant_control(p, {0.0}), params);
  CHECK(r.iterates.size() == 3);
  CHECK_FALSE(r.schedule_exhausted);
  params.alphas = {};
  CHECK_THROWS_AS(fmp_iterate(be, constant_control(p, {0.0}), params), ValidationError);
  CHECK_THROWS_AS(fmp_iterate(be, constant_control(p, {2.0}), FmpParams{}), ValidationError);
}

TEST_CASE("accepted costs decrease under localized feedback") {
  const Problem p = example1_problem();
  const ParticleBackend be(p);
  FmpParams params;
  params.alphas = {0.75};
  params.max_outer = 12;
  const FmpReport r = fmp_iterate(be, constant_control(p, {0.0}), params);
  const auto costs = r.accepted_costs();
  REQUIRE(costs.size() >= 3);
  double prev = r.initial_cost;
  for (double c : costs) {
    CHECK(c < prev - 1e-8 * (1 + std::abs(prev)));
    prev = c;
  }
  // First accepted control is 0.25 throughout: cost −0.25²/2.
  CHECK(costs[0] == doctest::Approx(-0.03125).epsilon(1e-12));
}

TEST_CASE("backend agreement on example 1") {
  const Problem p = example1_problem();
  FmpParams params;
  params.alphas = {0.0};
  const FmpReport a = fmp_iterate(ParticleBackend(p), constant_control(p, {0.0}), params);
  const FmpReport b = fmp_iterate(GridBackend(p), constant_control(p, {0.0}), params);
  REQUIRE(a.iterates.size() == b.iterates.size());
  for (std::size_t k = 0; k < a.iterates.size(); ++k) {
    CHECK(a.iterates[k].accepted == b.iterates[k].accepted);
    if (a.iterates[k].accepted) CHECK(a.iterates[k].control == b.iterates[k].control);
  }
  CHECK(std::abs(a.cost - b.cost) <= 3 * p.grid.h(0));
}

TEST_CASE("qualification_check") {
  const Problem p = example1_problem();
  const ParticleBackend be(p);
  const Partition pi = Partition::uniform_on_grid(p.time, 20);
  const ControlSignal zero = constant_control(p, {0.0});
  const auto self = qualification_check(be, zero, {FeedbackTrial{"reference", pi, 1.0, {}}});
  CHECK(self.holds);
  CHECK(self.witnesses.empty());

  const std::vector<FeedbackTrial> trials{FeedbackTrial{"explore+1", pi, 0.0, {+1}},
                                          FeedbackTrial{"explore-1", pi, 0.0, {-1}}};
  const auto q = qualification_check(be, zero, trials);
  CHECK_FALSE(q.holds);
  REQUIRE(q.witnesses.size() == 2);
  CHECK(q.witnesses[0].id == "explore+1");
  for (const auto& w : q.witnesses) CHECK(w.cost == doctest::Approx(-0.5).epsilon(1e-12));

  const auto best = qualification_check(be, constant_control(p, {1.0}), trials);
  CHECK(best.holds);
  CHECK(best.reference_cost == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK_THROWS_AS(qualification_check(be, zero, {}), ValidationError);
}
