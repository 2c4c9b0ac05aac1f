#include <doctest.h>

#include <fstream>
#include <sstream>

#include "msteer/errors.hpp"
#include "msteer/io.hpp"
#include "support.hpp"

using namespace msteer;
using msteer::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("format_number keeps 17 significant digits") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(-2.0) == "-2");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("split_csv_line trims cells") {
  const auto cells = split_csv_line(" a , b,c ");
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == "a");
  CHECK(cells[2] == "c");
}

TEST_CASE("grid CSV round trip is exact") {
  TempDir dir("io");
  const GridSpec g({-1.5, 0}, {1.5, 2}, {6, 4});
  const GridField f = sample_on_grid(g, [](double a, double b) { return std::sin(a) * b + 1.0 / 3.0; });
  write_grid_csv(dir / "f.csv", f);
  const std::string text = slurp(dir / "f.csv");
  CHECK(text.rfind("a,b,value\n", 0) == 0);
  const GridField back = read_grid_csv(dir / "f.csv");
  CHECK(back.spec.cells() == g.cells());
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.spec.domain_min()[k] == doctest::Approx(g.domain_min()[k]).epsilon(1e-14));
    CHECK(back.spec.domain_max()[k] == doctest::Approx(g.domain_max()[k]).epsilon(1e-14));
  }
  CHECK(back.values == f.values);
}

TEST_CASE("grid CSV reader rejects bad input") {
  TempDir dir("io");
  spit(dir / "bad.csv", "a,b,value\n0.5,0.5,1\n0.5,1.5,oops\n");
  try {
    read_grid_csv(dir / "bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  spit(dir / "head.csv", "x,y,z\n0,0,1\n");
  CHECK_THROWS_AS(read_grid_csv(dir / "head.csv"), ParseError);
  CHECK_THROWS_AS(read_grid_csv(dir / "missing.csv"), ValidationError);
}

TEST_CASE("empirical CSV round trip") {
  TempDir dir("io");
  const EmpiricalMeasure m({{0.1, -0.2}, {1.0 / 7.0, 3.0}, {-4, 5}}, {0.2, 0.3, 0.5});
  write_empirical_csv(dir / "m.csv", m);
  CHECK(slurp(dir / "m.csv").rfind("x1,x2,weight\n", 0) == 0);
  const EmpiricalMeasure back = read_empirical_csv(dir / "m.csv");
  CHECK(back.points() == m.points());
  CHECK(back.weights() == m.weights());
}

TEST_CASE("control CSV round trip") {
  TempDir dir("io");
  const ControlSignal u(Partition({0.0, 0.25, 1.0}), {{1.0, -0.5}, {0.0, 1.0 / 3.0}});
  write_control_csv(dir / "u.csv", u);
  CHECK(slurp(dir / "u.csv").rfind("t_start,t_end,u1,u2\n", 0) == 0);
  CHECK(read_control_csv(dir / "u.csv") == u);
  spit(dir / "gap.csv", "t_start,t_end,u1\n0,0.5,1\n0.6,1,0\n");
  CHECK_THROWS(read_control_csv(dir / "gap.csv"));
}

TEST_CASE("ledger CSV starts with the initial control") {
  TempDir dir("io");
  FmpIterate it{1, true, -0.5, 0.0, 1, 0.05, {0.0}, ControlSignal::constant(0, 1, {1.0})};
  FmpReport r{0.0, -0.5, it.control, {}, {it}, {}, false};
  write_ledger_csv(dir / "ledger.csv", r);
  std::istringstream in(slurp(dir / "ledger.csv"));
  std::string head, row0, row1;
  std::getline(in, head);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(head == "iter,accepted,cost,alpha,diam_pi,mass_loss_mu,mass_loss_nu");
  CHECK(row0 == "0,1,0,,,,");
  CHECK(row1.rfind("1,1,-0.5,0,0.050000000000000003,0,", 0) == 0);
}

TEST_CASE("residual CSV lists one row per node") {
  TempDir dir("io");
  ResidualReport r{0.0, 0.0, {{0.0, 0.0, {0.5, -1.0}}, {0.5, 0.0, {0.25, 0.0}}}};
  write_residual_csv(dir / "res.csv", r);
  std::istringstream in(slurp(dir / "res.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,residual,sigma_1,sigma_2");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  CHECK(rows == 2);
}
