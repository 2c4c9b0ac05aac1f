#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "msteer/backend.hpp"
#include "msteer/expr.hpp"

namespace msteer::testing {

/// ȧ = u, ḃ = −a u, ℓ = b, U = [−1, 1], T = 1, started from δ at `start`.
inline Problem example1_problem(Vec start = {0.0, 0.0}, std::size_t cells = 120, std::size_t steps = 100) {
  const GridSpec g({-3, -3}, {3, 3}, {cells, cells});
  PopulationSpec pop{VectorField::zero(2), ScalarField::from_expr(parse_scalar("b")),
                     GridMeasure::point_mass(g, start[0], start[1]), EmpiricalMeasure::dirac(start)};
  return Problem{{VectorField::from_expr(parse_field("(1, -a)"))}, ControlSet::symmetric(1, 1.0),
                 TimeGrid(0, 1, steps), g, {pop}};
}

inline ControlSignal constant_control(const Problem& p, Vec u) {
  return ControlSignal::constant(p.time.t0(), p.time.t_final(), std::move(u));
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("msteer-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace msteer::testing
