#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "msteer/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Steer populations of measures with the feedback maximum principle"};
  app.require_subcommand(1);

  msteer::RunOptions opt;
  std::string out, backend, control;
  std::uint64_t seed = 0;

  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec commands[] = {
      {"solve", "run the feedback iteration from the scenario's initial control"},
      {"simulate", "evolve the populations under a control and dump frames"},
      {"check-pmp", "maximum-principle residual of a control"},
      {"ingest", "write each population's initial atoms as an empirical CSV"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--scenario", opt.scenario, "scenario file or built-in name")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--backend", backend, "grid or particles")->check(CLI::IsMember({"grid", "particles"}));
    sub->add_option("--seed", seed, "seed for particle sampling");
    sub->add_option("--control", control, "control CSV (simulate, check-pmp)");
  }
  app.footer("built-in scenarios: example1, crossring, crossring-desk, mnist36\nexit codes: 0 ok, 2 invalid input, 3 solver error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : msteer::kExitValidation;
  }

  CLI::App* used = app.get_subcommands().front();
  opt.command = msteer::parse_command(used->get_name());
  if (!out.empty()) opt.out = out;
  if (!backend.empty()) opt.backend = backend == "grid" ? msteer::BackendKind::Grid : msteer::BackendKind::Particles;
  if (used->count("--seed")) opt.seed = seed;
  if (!control.empty()) opt.control = control;
  return msteer::run_main(opt, std::cout, std::cerr);
}
