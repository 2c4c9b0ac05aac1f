#include "msteer/run.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "msteer/errors.hpp"
#include "msteer/io.hpp"

namespace msteer {
namespace {

using nlohmann::json;

/// Roughly 320 MB of kept dual frames.
constexpr double kDualValueBudget = 4e7;

json vec_json(const Vec& v) { return json(v); }

json mean_json(const Measure& m) {
  return std::visit([](const auto& x) { return vec_json(moment_first(x).mean); }, m);
}

std::string backend_name(BackendKind k) { return k == BackendKind::Grid ? "grid" : "particles"; }

json parameters_json(const Scenario& s, BackendKind backend) {
  const FmpParams& f = s.algorithm.fmp;
  json p;
  p["t0"] = s.t0;
  p["horizon"] = s.horizon;
  p["steps"] = s.steps;
  p["grid_min"] = s.grid.domain_min();
  p["grid_max"] = s.grid.domain_max();
  p["grid_cells"] = s.grid.cells();
  p["control_lower"] = s.lower;
  p["control_upper"] = s.upper;
  p["control_initial"] = s.initial;
  p["backend"] = backend_name(backend);
  p["seed"] = s.algorithm.seed;
  if (backend == BackendKind::Particles) {
    p["particles"] = s.algorithm.particles;
    p["rk4_steps"] = s.algorithm.rk4_steps;
  }
  p["alphas"] = f.alphas;
  p["explores"] = f.explores;
  p["max_outer"] = f.max_outer;
  p["intervals"] = f.initial_intervals;
  p["scheme"] = f.scheme == SamplingScheme::U ? "u" : "ou";
  p["eps1"] = f.eps1 ? json(*f.eps1) : json(nullptr);
  p["eps2"] = f.eps2 ? json(*f.eps2) : json(nullptr);
  p["eps_tie"] = f.eps_tie ? json(*f.eps_tie) : json(nullptr);
  return p;
}

class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }
  std::filesystem::path add(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

std::string frame_name(const std::string& pop, std::size_t node) { return pop + "_t" + std::to_string(node) + ".csv"; }

void write_measure(const std::filesystem::path& path, const Measure& m) {
  std::visit([&](const auto& x) {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, GridMeasure>) write_grid_csv(path, x);
    else write_empirical_csv(path, x);
  }, m);
}

void write_frames(Artifacts& art, const Scenario& s, std::size_t node, const ProcessState& state) {
  for (std::size_t p = 0; p < s.populations.size(); ++p)
    write_measure(art.add(frame_name(s.populations[p].name, node)), state.populations[p]);
}

json population_results(const Scenario& s, const Backend& b, const ProcessState& state) {
  json out = json::object();
  const auto loss = b.mass_loss(state);
  for (std::size_t p = 0; p < s.populations.size(); ++p)
    out[s.populations[p].name] = {{"mean", mean_json(state.populations[p])}, {"mass_loss", loss[p]}};
  return out;
}

std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::Solve;
  if (name == "simulate") return Command::Simulate;
  if (name == "check-pmp") return Command::CheckPmp;
  if (name == "ingest") return Command::Ingest;
  throw ValidationError("command", "unknown command '" + name + "'");
}

std::string command_name(Command c) {
  switch (c) {
    case Command::Solve: return "solve";
    case Command::Simulate: return "simulate";
    case Command::CheckPmp: return "check-pmp";
    case Command::Ingest: return "ingest";
  }
  return "?";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const SyntaxError*>(&e) || dynamic_cast<const UnknownIdentifier*>(&e) ||
      dynamic_cast<const DimensionMismatch*>(&e) || dynamic_cast<const AlphaOutOfRange*>(&e) ||
      dynamic_cast<const EmptyMeasure*>(&e) || dynamic_cast<const IncompatibleGrids*>(&e) ||
      dynamic_cast<const GridTooSmall*>(&e) || dynamic_cast<const TooLarge*>(&e))
    return kExitValidation;
  return kExitSolver;
}

ControlSignal load_control(const Scenario& s, const std::filesystem::path& path) {
  ControlSignal u = read_control_csv(path);
  const double tol = 1e-9 * (s.horizon - s.t0);
  if (std::abs(u.partition().start() - s.t0) > tol || std::abs(u.partition().end() - s.horizon) > tol)
    throw ValidationError("control", "control must span [t0, horizon] of the scenario");
  if (u.controls() != s.basis.size()) throw DimensionMismatch(s.basis.size(), u.controls());
  if (!u.within(s.control_set(), 1e-12)) throw ValidationError("control", "values leave the control box");
  if (u.partition().start() != s.t0 || u.partition().end() != s.horizon) {
    std::vector<double> nodes = u.partition().nodes();
    nodes.front() = s.t0;
    nodes.back() = s.horizon;
    u = ControlSignal(Partition(std::move(nodes)), u.values());
  }
  return u;
}

std::vector<std::size_t> residual_nodes(const Scenario& s) {
  const double per_frame = static_cast<double>(s.grid.size() * s.populations.size());
  const auto budget = static_cast<std::size_t>(std::max(1.0, kDualValueBudget / per_frame));
  const std::size_t stride = std::max<std::size_t>(1, (s.steps + budget - 1) / budget);
  std::vector<std::size_t> nodes;
  for (std::size_t n = 0; n < s.steps; n += stride) nodes.push_back(n);
  return nodes;
}

RunResult run(const Scenario& scenario, const RunOptions& options) {
  Scenario s = scenario;
  if (options.seed) s.algorithm.seed = *options.seed;
  const BackendKind kind = options.backend.value_or(s.algorithm.backend);

  std::filesystem::path dir = options.out;
  if (dir.empty()) dir = s.output_dir;
  if (dir.empty()) dir = std::filesystem::path(s.name + "-" + command_name(options.command));

  json manifest;
  manifest["tool"] = "measure-steer";
  manifest["command"] = command_name(options.command);
  manifest["scenario"] = {{"name", s.name}, {"source", options.scenario}, {"hash", "fnv1a64:" + s.hash()}};
  manifest["parameters"] = parameters_json(s, kind);
  manifest["warnings"] = s.warnings;

  RunResult result;
  if (options.command == Command::Ingest) {
    const Problem p = make_problem(s, BackendKind::Particles);
    Artifacts art(dir);
    json res = json::object();
    for (std::size_t k = 0; k < p.populations.size(); ++k) {
      const EmpiricalMeasure& m = *p.populations[k].particle_initial;
      write_empirical_csv(art.add(s.populations[k].name + "_atoms.csv"), m);
      res[s.populations[k].name] = {{"atoms", m.size()}, {"mean", vec_json(moment_first(m).mean)}};
    }
    manifest["results"] = res;
    manifest["artifacts"] = art.names();
    std::ofstream(art.add("manifest.json")) << manifest.dump(2) << "\n";
    result = {art.dir(), art.names(), "ingested " + std::to_string(p.populations.size()) + " population(s)"};
    return result;
  }

  const auto backend = make_backend(s, kind);
  const TimeGrid tg = s.time_grid();
  Artifacts art(dir);

  switch (options.command) {
    case Command::Solve: {
      if (options.control) throw ValidationError("control", "solve starts from the scenario's initial control");
      const FmpReport report = fmp_iterate(*backend, s.initial_control(), s.algorithm.fmp);
      write_ledger_csv(art.add("ledger.csv"), report);
      write_control_csv(art.add("control.csv"), report.control);
      write_frames(art, s, tg.steps(), report.final_state);
      std::size_t accepted = 0;
      for (const auto& it : report.iterates) accepted += it.accepted;
      json res;
      res["initial_cost"] = report.initial_cost;
      res["cost"] = report.cost;
      res["accepted_costs"] = report.accepted_costs();
      res["iterations"] = report.iterates.size();
      res["accepted"] = accepted;
      res["schedule_exhausted"] = report.schedule_exhausted;
      res["qualification_holds"] = report.qualification.holds;
      res["best_violation"] =
          std::isfinite(report.qualification.best_violation) ? json(report.qualification.best_violation) : json(nullptr);
      res["populations"] = population_results(s, *backend, report.final_state);
      manifest["results"] = res;
      result.summary = "cost " + format_short(report.initial_cost) + " -> " + format_short(report.cost) + " after " +
                       std::to_string(report.iterates.size()) + " iteration(s), " + std::to_string(accepted) +
                       " accepted";
      break;
    }
    case Command::Simulate: {
      const ControlSignal u = options.control ? load_control(s, *options.control) : s.initial_control();
      const std::size_t stride = s.frame_stride ? s.frame_stride : std::max<std::size_t>(1, tg.steps() / 10);
      ProcessState last;
      backend->rollout(u, strided_nodes(tg, stride), [&](std::size_t n, const ProcessState& st) {
        write_frames(art, s, n, st);
        if (n == tg.steps()) last = st;
      });
      const double cost = backend->cost(last);
      manifest["results"] = {{"cost", cost}, {"frame_stride", stride},
                             {"populations", population_results(s, *backend, last)}};
      result.summary = "cost " + format_short(cost);
      break;
    }
    case Command::CheckPmp: {
      const ControlSignal u = options.control ? load_control(s, *options.control) : s.initial_control();
      const auto nodes = residual_nodes(s);
      const DualSet duals = backend->solve_duals(u, nodes);
      std::map<std::size_t, SwitchingVector> sigma;
      backend->rollout(u, nodes, [&](std::size_t n, const ProcessState& st) {
        sigma.emplace(n, backend->switching(st, duals, n));
      });
      const ResidualReport rep =
          pmp_residual(u, tg, s.control_set(), nodes, [&](std::size_t n) { return sigma.at(n); });
      write_residual_csv(art.add("residual.csv"), rep);
      manifest["results"] = {{"residual_max", rep.residual_max}, {"residual_l1", rep.residual_l1},
                             {"nodes", nodes.size()}, {"node_stride", nodes.size() > 1 ? nodes[1] - nodes[0] : 1}};
      result.summary = "residual max " + format_short(rep.residual_max) + ", L1 " + format_short(rep.residual_l1);
      break;
    }
    case Command::Ingest:
      break;
  }

  manifest["artifacts"] = art.names();
  std::ofstream(art.add("manifest.json")) << manifest.dump(2) << "\n";
  result.out_dir = art.dir();
  result.artifacts = art.names();
  return result;
}

int run_main(const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const Scenario s = load_scenario(options.scenario);
    for (const auto& w : s.warnings) err << "warning: " << w << "\n";
    const RunResult r = run(s, options);
    out << command_name(options.command) << ": " << r.summary << "\n";
    out << "wrote " << r.artifacts.size() << " file(s) to " << r.out_dir.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace msteer
