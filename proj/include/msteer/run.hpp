#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msteer/scenario.hpp"

namespace msteer {

enum class Command { Solve, Simulate, CheckPmp, Ingest };

Command parse_command(const std::string& name);
std::string command_name(Command c);

struct RunOptions {
  Command command = Command::Solve;
  std::string scenario;                 // path or built-in name
  std::filesystem::path out;            // empty: scenario output dir, else ./<name>-<command>
  std::optional<BackendKind> backend;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> control;  // simulate / check-pmp; default ū of the scenario
};

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<std::string> artifacts;  // file names inside out_dir, manifest last
  std::string summary;                 // one line for the terminal
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;

/// 2 for bad input (scenario, files, dimensions), 3 for everything else.
int exit_code_for(const std::exception& e);

/// Runs one command on a loaded scenario and writes its artifacts; throws on failure.
RunResult run(const Scenario& scenario, const RunOptions& options);

/// Loads the scenario, runs, reports to the streams, and returns the exit code. Never throws.
int run_main(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Reads a control CSV and checks it against the scenario horizon and control box.
ControlSignal load_control(const Scenario& s, const std::filesystem::path& path);

/// Residual nodes n < steps, strided so the kept dual frames stay within a memory budget.
std::vector<std::size_t> residual_nodes(const Scenario& s);

}  // namespace msteer
