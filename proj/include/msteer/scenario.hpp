#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msteer/backend.hpp"
#include "msteer/expr.hpp"
#include "msteer/fmp.hpp"

namespace msteer {

/// Analytic initial density on the scenario grid.
struct BlobSpec {
  enum class Shape { Point, Gaussian, Cross, Ring };
  Shape shape = Shape::Gaussian;
  std::array<double, 2> center{0.0, 0.0};
  double sigma = 0.5;                    // gaussian spread
  double arm = 0.25;                     // cross: half-width of each bar
  double extent = 1.0;                   // cross: half-size of the bounding box
  std::array<double, 2> radii{0.5, 1.0}; // ring: inner and outer radius
  std::optional<double> blur;            // gaussian blur spread for cross/ring; default 2h
};

/// Unit-mass grid density for a blob (point masses are deposited bilinearly).
GridMeasure blob_density(const GridSpec& grid, const BlobSpec& blob);

struct SourceSpec {
  enum class Kind { Blob, GridCsv, EmpiricalCsv, Pgm, Idx };
  Kind kind = Kind::Blob;
  BlobSpec blob;
  std::filesystem::path path;
  std::size_t index = 0;             // idx image index
  double threshold = 0.0;            // image intensity threshold
  double image_scale = 1.0;          // unit square scaled by this ...
  std::array<double, 2> offset{0.0, 0.0};  // ... then shifted
};

struct PopulationConfig {
  std::string name;
  SourceSpec source;
  FieldExpr drift;
  std::optional<ScalarExpr> cost;
  std::optional<std::array<double, 2>> target;  // ℓ = |x − target|² when no cost expression
};

enum class BackendKind { Grid, Particles };

struct AlgorithmConfig {
  FmpParams fmp;
  BackendKind backend = BackendKind::Grid;
  std::size_t particles = 10000;
  std::size_t rk4_steps = 4;
  std::uint64_t seed = 0;
};

struct Scenario {
  std::string name;
  double t0 = 0.0;
  double horizon = 1.0;
  GridSpec grid{{-1.0, -1.0}, {1.0, 1.0}, {1, 1}};
  std::size_t steps = 1;
  std::vector<FieldExpr> basis;
  Vec lower;
  Vec upper;
  Vec initial;
  std::vector<PopulationConfig> populations;
  AlgorithmConfig algorithm;
  std::filesystem::path output_dir;
  std::size_t frame_stride = 0;  // 0: about ten frames
  std::vector<std::string> warnings;
  std::string source_text;

  TimeGrid time_grid() const { return TimeGrid(t0, horizon, steps); }
  ControlSet control_set() const { return ControlSet(lower, upper); }
  ControlSignal initial_control() const { return ControlSignal::constant(t0, horizon, initial); }
  /// FNV-1a 64 of the scenario text, as 16 hex digits.
  std::string hash() const;
};

/// Names accepted by load_scenario in place of a path.
std::vector<std::string> builtin_scenarios();
/// Text of a built-in scenario, or nullopt.
std::optional<std::string> builtin_scenario_text(std::string_view name);

/// Parses scenario text; relative file paths resolve against `base_dir`.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
/// A built-in name or a path to a scenario file.
Scenario load_scenario(const std::string& path_or_builtin);

Problem make_problem(const Scenario& s, BackendKind backend);
std::unique_ptr<Backend> make_backend(const Scenario& s, BackendKind backend);

}  // namespace msteer
