#include "msteer/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "msteer/errors.hpp"

namespace msteer {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string(), "cannot write file");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  return in;
}

double parse_number(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) throw ParseError(line, path.string() + ": not a number '" + cell + "'");
  return v;
}

// Numeric rows after a header whose first cells must match `header`.
std::vector<std::vector<double>> read_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                                            std::size_t min_columns, std::vector<std::string>* columns = nullptr) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t n = 0;
  std::vector<std::string> head;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    head = split_csv_line(line);
    break;
  }
  if (head.size() < min_columns || !std::equal(header.begin(), header.end(), head.begin()))
    throw ParseError(n, path.string() + ": unexpected header");
  if (columns) *columns = head;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != head.size()) throw ParseError(n, path.string() + ": wrong number of columns");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c, path, n));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_grid_csv(const std::filesystem::path& path, const GridField& field) {
  std::ofstream out = open_out(path);
  out << "a,b,value\n";
  const GridSpec& g = field.spec;
  for (std::size_t i = 0; i < g.na(); ++i)
    for (std::size_t j = 0; j < g.nb(); ++j)
      out << format_number(g.center_a(i)) << ',' << format_number(g.center_b(j)) << ','
          << format_number(field.at(i, j)) << '\n';
}

void write_grid_csv(const std::filesystem::path& path, const GridMeasure& measure) {
  write_grid_csv(path, GridField(measure.spec(), measure.density()));
}

GridField read_grid_csv(const std::filesystem::path& path) {
  const auto rows = read_table(path, {"a", "b", "value"}, 3);
  if (rows.empty()) throw ValidationError(path.string(), "no cells");
  std::vector<double> as, bs;
  for (const auto& r : rows) {
    as.push_back(r[0]);
    bs.push_back(r[1]);
  }
  auto axis = [&](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double x, double y) { return std::abs(x - y) <= 1e-9 * (1 + std::abs(x)); }),
            v.end());
    return v;
  };
  const auto ca = axis(as), cb = axis(bs);
  if (ca.size() < 2 || cb.size() < 2) throw ValidationError(path.string(), "grid needs two centers per axis");
  if (ca.size() * cb.size() != rows.size()) throw ValidationError(path.string(), "cells do not fill a rectangle");
  const double ha = (ca.back() - ca.front()) / static_cast<double>(ca.size() - 1);
  const double hb = (cb.back() - cb.front()) / static_cast<double>(cb.size() - 1);
  const GridSpec g({ca.front() - ha / 2, cb.front() - hb / 2}, {ca.back() + ha / 2, cb.back() + hb / 2},
                   {ca.size(), cb.size()});
  GridField f(g);
  std::vector<bool> seen(g.size(), false);
  for (const auto& r : rows) {
    const double si = (r[0] - g.center_a(0)) / ha, sj = (r[1] - g.center_b(0)) / hb;
    const auto i = static_cast<std::size_t>(std::llround(si)), j = static_cast<std::size_t>(std::llround(sj));
    if (std::abs(si - static_cast<double>(i)) > 1e-6 || std::abs(sj - static_cast<double>(j)) > 1e-6)
      throw ValidationError(path.string(), "centers are not uniformly spaced");
    if (seen[g.index(i, j)]) throw ValidationError(path.string(), "duplicate cell");
    seen[g.index(i, j)] = true;
    f.at(i, j) = r[2];
  }
  return f;
}

void write_empirical_csv(const std::filesystem::path& path, const EmpiricalMeasure& m) {
  if (m.dim() != 2) throw DimensionMismatch(2, m.dim());
  std::ofstream out = open_out(path);
  out << "x1,x2,weight\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    out << format_number(m.points()[i][0]) << ',' << format_number(m.points()[i][1]) << ','
        << format_number(m.weights()[i]) << '\n';
}

EmpiricalMeasure read_empirical_csv(const std::filesystem::path& path) {
  const auto rows = read_table(path, {"x1", "x2", "weight"}, 3);
  std::vector<Vec> pts;
  std::vector<double> w;
  for (const auto& r : rows) {
    if (r.size() != 3) throw ValidationError(path.string(), "expected x1,x2,weight");
    pts.push_back({r[0], r[1]});
    w.push_back(r[2]);
  }
  return EmpiricalMeasure(std::move(pts), std::move(w));
}

void write_control_csv(const std::filesystem::path& path, const ControlSignal& u) {
  std::ofstream out = open_out(path);
  out << "t_start,t_end";
  for (std::size_t k = 0; k < u.controls(); ++k) out << ",u" << k + 1;
  out << '\n';
  const auto& nodes = u.partition().nodes();
  for (std::size_t k = 0; k < u.values().size(); ++k) {
    out << format_number(nodes[k]) << ',' << format_number(nodes[k + 1]);
    for (double v : u.values()[k]) out << ',' << format_number(v);
    out << '\n';
  }
}

ControlSignal read_control_csv(const std::filesystem::path& path) {
  std::vector<std::string> cols;
  const auto rows = read_table(path, {"t_start", "t_end"}, 3, &cols);
  for (std::size_t k = 2; k < cols.size(); ++k)
    if (cols[k] != "u" + std::to_string(k - 1)) throw ParseError(1, path.string() + ": unexpected header");
  if (rows.empty()) throw ValidationError(path.string(), "no control intervals");
  std::vector<double> nodes{rows.front()[0]};
  std::vector<Vec> values;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (std::abs(rows[k][0] - nodes.back()) > 1e-12 * (1 + std::abs(nodes.back())))
      throw ValidationError(path.string(), "control intervals must be contiguous");
    nodes.push_back(rows[k][1]);
    values.emplace_back(rows[k].begin() + 2, rows[k].end());
  }
  return ControlSignal(Partition(std::move(nodes)), std::move(values));
}

void write_ledger_csv(const std::filesystem::path& path, const FmpReport& report) {
  std::ofstream out = open_out(path);
  out << "iter,accepted,cost,alpha,diam_pi,mass_loss_mu,mass_loss_nu\n";
  auto loss = [](const std::vector<double>& l, std::size_t k) { return k < l.size() ? format_number(l[k]) : "0"; };
  out << "0,1," << format_number(report.initial_cost) << ",,,,\n";
  for (const auto& it : report.iterates)
    out << it.iteration << ',' << (it.accepted ? 1 : 0) << ',' << format_number(it.cost) << ','
        << format_number(it.alpha) << ',' << format_number(it.diam) << ',' << loss(it.mass_loss, 0) << ','
        << loss(it.mass_loss, 1) << '\n';
}

void write_residual_csv(const std::filesystem::path& path, const ResidualReport& report) {
  std::ofstream out = open_out(path);
  out << "t,residual";
  const std::size_t m = report.rows.empty() ? 0 : report.rows.front().sigma.size();
  for (std::size_t k = 0; k < m; ++k) out << ",sigma_" << k + 1;
  out << '\n';
  for (const auto& r : report.rows) {
    out << format_number(r.t) << ',' << format_number(r.residual);
    for (double s : r.sigma) out << ',' << format_number(s);
    out << '\n';
  }
}

}  // namespace msteer
