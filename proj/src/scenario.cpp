#include "msteer/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "msteer/errors.hpp"
#include "msteer/io.hpp"
#include "msteer/raster.hpp"

namespace msteer {
namespace {

// ---------------------------------------------------------------- blobs

/// (1, 2, 1) / 4 along both axes, zero outside the grid.
std::vector<double> triangular_smooth(const GridSpec& g, const std::vector<double>& v) {
  std::vector<double> tmp(v.size(), 0.0), out(v.size(), 0.0);
  const std::size_t na = g.na(), nb = g.nb();
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double s = 2.0 * v[g.index(i, j)];
      if (i > 0) s += v[g.index(i - 1, j)];
      if (i + 1 < na) s += v[g.index(i + 1, j)];
      tmp[g.index(i, j)] = 0.25 * s;
    }
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double s = 2.0 * tmp[g.index(i, j)];
      if (j > 0) s += tmp[g.index(i, j - 1)];
      if (j + 1 < nb) s += tmp[g.index(i, j + 1)];
      out[g.index(i, j)] = 0.25 * s;
    }
  return out;
}

std::vector<double> gaussian_kernel(double sigma, double h) {
  const auto radius = static_cast<std::size_t>(std::ceil(4.0 * sigma / h));
  std::vector<double> k(2 * radius + 1);
  for (std::size_t r = 0; r < k.size(); ++r) {
    const double d = (static_cast<double>(r) - static_cast<double>(radius)) * h / sigma;
    k[r] = std::exp(-0.5 * d * d);
  }
  return k;
}

/// Separable Gaussian blur; mass carried outside the grid is dropped.
std::vector<double> gaussian_blur(const GridSpec& g, const std::vector<double>& v, double sigma) {
  if (sigma <= 0.0) return v;
  const std::size_t na = g.na(), nb = g.nb();
  std::vector<double> tmp(v.size(), 0.0), out(v.size(), 0.0);
  const auto ka = gaussian_kernel(sigma, g.h(0));
  const auto kb = gaussian_kernel(sigma, g.h(1));
  const auto ra = static_cast<long>(ka.size() / 2), rb = static_cast<long>(kb.size() / 2);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double s = 0.0;
      for (long d = -ra; d <= ra; ++d) {
        const long ii = static_cast<long>(i) + d;
        if (ii < 0 || ii >= static_cast<long>(na)) continue;
        s += ka[static_cast<std::size_t>(d + ra)] * v[g.index(static_cast<std::size_t>(ii), j)];
      }
      tmp[g.index(i, j)] = s;
    }
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double s = 0.0;
      for (long d = -rb; d <= rb; ++d) {
        const long jj = static_cast<long>(j) + d;
        if (jj < 0 || jj >= static_cast<long>(nb)) continue;
        s += kb[static_cast<std::size_t>(d + rb)] * tmp[g.index(i, static_cast<std::size_t>(jj))];
      }
      out[g.index(i, j)] = s;
    }
  return out;
}

// ---------------------------------------------------------------- tokens

struct Line {
  std::size_t number;
  std::string text;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Drops a trailing comment; '#' inside quotes is kept.
std::string strip_comment(const std::string& s, std::size_t line) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  if (quoted) throw ParseError(line, "unterminated string");
  return s;
}

double to_number(const std::string& s, std::size_t line) {
  const std::string t = trim(s);
  if (t.empty()) throw ParseError(line, "expected a number");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + t + "'");
  }
  if (used != t.size()) throw ParseError(line, "expected a number, got '" + t + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite number '" + t + "'");
  return v;
}

/// "1.5" or "(1, 2, 3)".
Vec to_tuple(const std::string& s, std::size_t line) {
  std::string t = trim(s);
  if (!t.empty() && t.front() == '(') {
    if (t.back() != ')') throw ParseError(line, "unbalanced parenthesis");
    t = t.substr(1, t.size() - 2);
    Vec out;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(to_number(cell, line));
    if (out.empty()) throw ParseError(line, "empty tuple");
    return out;
  }
  return {to_number(t, line)};
}

/// One or more comma-separated quoted strings.
std::vector<std::string> to_strings(const std::string& s, std::size_t line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::string t = trim(s);
  while (i < t.size()) {
    if (t[i] != '"') throw ParseError(line, "expected a quoted string");
    const auto close = t.find('"', i + 1);
    if (close == std::string::npos) throw ParseError(line, "unterminated string");
    out.push_back(t.substr(i + 1, close - i - 1));
    i = close + 1;
    while (i < t.size() && (t[i] == ' ' || t[i] == '\t')) ++i;
    if (i < t.size()) {
      if (t[i] != ',') throw ParseError(line, "expected ',' between strings");
      ++i;
      while (i < t.size() && (t[i] == ' ' || t[i] == '\t')) ++i;
      if (i == t.size()) throw ParseError(line, "trailing ','");
    }
  }
  if (out.empty()) throw ParseError(line, "expected a quoted string");
  return out;
}

std::string to_string_value(const std::string& s, std::size_t line) {
  const auto v = to_strings(s, line);
  if (v.size() != 1) throw ParseError(line, "expected one quoted string");
  return v.front();
}

/// Bare word or quoted string.
std::string to_word(const std::string& s, std::size_t line) {
  const std::string t = trim(s);
  if (!t.empty() && t.front() == '"') return to_string_value(t, line);
  if (t.empty() || t.find_first_of(" \t,()") != std::string::npos) throw ParseError(line, "expected a word");
  return t;
}

std::size_t to_count(const std::string& s, std::size_t line) {
  const double v = to_number(s, line);
  if (v < 0 || v != std::floor(v) || v > 1e15) throw ParseError(line, "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::array<double, 2> to_pair(const std::string& s, std::size_t line, const std::string& field) {
  const Vec v = to_tuple(s, line);
  if (v.size() == 1) return {v[0], v[0]};
  if (v.size() != 2) throw ValidationError(field, "expected 2 components");
  return {v[0], v[1]};
}

Vec broadcast(const Vec& v, std::size_t m, const std::string& field) {
  if (v.size() == m) return v;
  if (v.size() == 1) return Vec(m, v[0]);
  throw ValidationError(field, "expected 1 or " + std::to_string(m) + " components, got " + std::to_string(v.size()));
}

// ---------------------------------------------------------------- raw document

struct Entry {
  std::string value;
  std::size_t line;
};

struct Section {
  std::string kind;  // "", "time", "grid", "controls", "population", "algorithm", "output"
  std::string label;
  std::size_t line = 0;
  std::map<std::string, Entry> entries;
};

std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> out(1);
  std::size_t number = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  static const std::set<std::string> kinds{"time", "grid", "controls", "population", "algorithm", "output"};
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(strip_comment(raw, number));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(number, "section header must end with ']'");
      const std::string inner = trim(line.substr(1, line.size() - 2));
      Section s;
      s.line = number;
      const auto space = inner.find_first_of(" \t");
      s.kind = inner.substr(0, space);
      if (space != std::string::npos) s.label = trim(inner.substr(space));
      if (!kinds.count(s.kind)) throw ParseError(number, "unknown section [" + s.kind + "]");
      if (s.kind == "population") {
        if (s.label.empty() || s.label.find_first_of(" \t") != std::string::npos)
          throw ParseError(number, "population section needs one name");
      } else if (!s.label.empty()) {
        throw ParseError(number, "section [" + s.kind + "] takes no name");
      } else {
        for (const auto& prev : out)
          if (prev.kind == s.kind) throw ParseError(number, "duplicate section [" + s.kind + "]");
      }
      out.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(number, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t\"") != std::string::npos) throw ParseError(number, "bad key");
    if (value.empty()) throw ParseError(number, "missing value for '" + key + "'");
    auto& entries = out.back().entries;
    if (entries.count(key)) throw ParseError(number, "duplicate key '" + key + "'");
    entries.emplace(key, Entry{value, number});
  }
  return out;
}

/// Consumes entries of one section and rejects leftovers.
class Reader {
 public:
  Reader(const Section& s, std::string prefix) : section_(s), prefix_(std::move(prefix)) {}

  const Entry* get(const std::string& key) {
    used_.insert(key);
    const auto it = section_.entries.find(key);
    return it == section_.entries.end() ? nullptr : &it->second;
  }
  std::string field(const std::string& key) const { return prefix_ + key; }

  void finish() const {
    for (const auto& [k, e] : section_.entries)
      if (!used_.count(k)) throw ValidationError(prefix_ + k, "unknown key (line " + std::to_string(e.line) + ")");
  }

 private:
  const Section& section_;
  std::string prefix_;
  std::set<std::string> used_;
};

FieldExpr parse_field_at(const std::string& src, const std::string& field) {
  try {
    return parse_field(src);
  } catch (const SyntaxError& e) {
    throw ValidationError(field, e.what());
  } catch (const UnknownIdentifier& e) {
    throw ValidationError(field, e.what());
  }
}

ScalarExpr parse_scalar_at(const std::string& src, const std::string& field) {
  try {
    return parse_scalar(src);
  } catch (const SyntaxError& e) {
    throw ValidationError(field, e.what());
  } catch (const UnknownIdentifier& e) {
    throw ValidationError(field, e.what());
  }
}

void check_field(const FieldExpr& f, const std::string& field) {
  if (f.dim() != 2) throw ValidationError(field, "expected 2 components, got " + std::to_string(f.dim()));
  if (f.arity() > 2) throw ValidationError(field, "only the variables a and b are available");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

PopulationConfig read_population(const Section& s, const std::filesystem::path& base) {
  PopulationConfig pop;
  pop.name = s.label;
  Reader r(s, "population." + s.label + ".");

  pop.drift = parse_field_at("(0, 0)", r.field("drift"));
  if (const Entry* e = r.get("drift")) pop.drift = parse_field_at(to_string_value(e->value, e->line), r.field("drift"));
  check_field(pop.drift, r.field("drift"));

  const Entry* cost = r.get("cost");
  const Entry* target = r.get("target");
  if (cost && target) throw ValidationError(r.field("cost"), "give either cost or target, not both");
  if (!cost && !target) throw ValidationError(r.field("cost"), "a cost expression or a target is required");
  if (cost) {
    pop.cost = parse_scalar_at(to_string_value(cost->value, cost->line), r.field("cost"));
    if (pop.cost->arity() > 2) throw ValidationError(r.field("cost"), "only the variables a and b are available");
  } else {
    pop.target = to_pair(target->value, target->line, r.field("target"));
  }

  SourceSpec& src = pop.source;
  const Entry* se = r.get("source");
  const std::string kind = se ? to_word(se->value, se->line) : "gaussian";
  BlobSpec& blob = src.blob;
  if (kind == "gaussian" || kind == "cross" || kind == "ring" || kind == "point") {
    src.kind = SourceSpec::Kind::Blob;
    blob.shape = kind == "gaussian" ? BlobSpec::Shape::Gaussian
                 : kind == "cross"  ? BlobSpec::Shape::Cross
                 : kind == "ring"   ? BlobSpec::Shape::Ring
                                    : BlobSpec::Shape::Point;
  } else if (kind == "grid-csv") {
    src.kind = SourceSpec::Kind::GridCsv;
  } else if (kind == "empirical-csv") {
    src.kind = SourceSpec::Kind::EmpiricalCsv;
  } else if (kind == "pgm") {
    src.kind = SourceSpec::Kind::Pgm;
  } else if (kind == "idx") {
    src.kind = SourceSpec::Kind::Idx;
  } else {
    throw ValidationError(r.field("source"), "unknown source '" + kind + "'");
  }

  const bool is_blob = src.kind == SourceSpec::Kind::Blob;
  const bool is_image = src.kind == SourceSpec::Kind::Pgm || src.kind == SourceSpec::Kind::Idx;
  auto only = [&](const std::string& key, bool allowed) {
    const Entry* e = r.get(key);
    if (e && !allowed) throw ValidationError(r.field(key), "not used by source '" + kind + "'");
    return e;
  };
  if (const Entry* e = only("center", is_blob)) blob.center = to_pair(e->value, e->line, r.field("center"));
  if (const Entry* e = only("sigma", is_blob && blob.shape == BlobSpec::Shape::Gaussian)) {
    blob.sigma = to_number(e->value, e->line);
    if (!(blob.sigma > 0)) throw ValidationError(r.field("sigma"), "must be positive");
  }
  if (const Entry* e = only("arm", is_blob && blob.shape == BlobSpec::Shape::Cross)) {
    blob.arm = to_number(e->value, e->line);
    if (!(blob.arm > 0)) throw ValidationError(r.field("arm"), "must be positive");
  }
  if (const Entry* e = only("extent", is_blob && blob.shape == BlobSpec::Shape::Cross)) {
    blob.extent = to_number(e->value, e->line);
    if (!(blob.extent > 0)) throw ValidationError(r.field("extent"), "must be positive");
  }
  if (const Entry* e = only("radii", is_blob && blob.shape == BlobSpec::Shape::Ring)) {
    blob.radii = to_pair(e->value, e->line, r.field("radii"));
    if (!(blob.radii[0] >= 0 && blob.radii[1] > blob.radii[0]))
      throw ValidationError(r.field("radii"), "need 0 <= inner < outer");
  }
  const bool blurred = is_blob && (blob.shape == BlobSpec::Shape::Cross || blob.shape == BlobSpec::Shape::Ring);
  if (const Entry* e = only("blur", blurred)) {
    blob.blur = to_number(e->value, e->line);
    if (*blob.blur < 0) throw ValidationError(r.field("blur"), "must be nonnegative");
  }
  if (const Entry* e = only("path", !is_blob)) src.path = resolve(base, to_string_value(e->value, e->line));
  if (const Entry* e = only("index", src.kind == SourceSpec::Kind::Idx)) src.index = to_count(e->value, e->line);
  if (const Entry* e = only("threshold", is_image)) {
    src.threshold = to_number(e->value, e->line);
    if (src.threshold < 0 || src.threshold >= 1) throw ValidationError(r.field("threshold"), "must lie in [0, 1)");
  }
  if (const Entry* e = only("scale", is_image)) {
    src.image_scale = to_number(e->value, e->line);
    if (!(src.image_scale > 0)) throw ValidationError(r.field("scale"), "must be positive");
  }
  if (const Entry* e = only("offset", is_image)) src.offset = to_pair(e->value, e->line, r.field("offset"));
  if (!is_blob) {
    if (src.path.empty()) throw ValidationError(r.field("path"), "required for source '" + kind + "'");
    if (!std::filesystem::is_regular_file(src.path))
      throw ValidationError(r.field("path"), "file not found: " + src.path.string());
  }
  r.finish();
  return pop;
}

/// Largest per-axis speed over the probes with |u^k| at its bound, turned into a CFL estimate.
double cfl_estimate(const Scenario& s) {
  const auto probes = h1_probes(s.grid, 256);
  double worst = 0.0;
  for (const auto& pop : s.populations) {
    std::vector<FieldExpr> fields{pop.drift};
    Vec weights{1.0};
    for (std::size_t k = 0; k < s.basis.size(); ++k) {
      fields.push_back(s.basis[k]);
      weights.push_back(std::max(std::abs(s.lower[k]), std::abs(s.upper[k])));
    }
    double sa = 0.0, sb = 0.0;
    double out[2];
    for (const auto& x : probes) {
      double va = 0.0, vb = 0.0;
      for (std::size_t f = 0; f < fields.size(); ++f) {
        fields[f].eval(x, out);
        va += weights[f] * std::abs(out[0]);
        vb += weights[f] * std::abs(out[1]);
      }
      sa = std::max(sa, va);
      sb = std::max(sb, vb);
    }
    const double tau = (s.horizon - s.t0) / static_cast<double>(s.steps);
    worst = std::max(worst, tau * (sa / s.grid.h(0) + sb / s.grid.h(1)));
  }
  return worst;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------- built-ins

constexpr const char* kExample1 = R"SCN(# a' = u, b' = -a u, cost b, started at the origin
name = "example1"

[time]
t0 = 0
horizon = 1
steps = 100

[grid]
min = (-3, -3)
max = (3, 3)
cells = (120, 120)

[controls]
basis = "(1, -a)"
lower = -1
upper = 1
initial = 0

[population mu]
source = point
center = (0, 0)
cost = "b"

[algorithm]
backend = particles
alphas = 0
explores = (1, -1)
max_outer = 30
intervals = 20
)SCN";

constexpr const char* kCrossRing = R"SCN(# cross and ring steered toward (1, 1) and (-1, -1)
name = "crossring"

[time]
t0 = 0
horizon = 2
tau = 0.002

[grid]
min = (-5, -5)
max = (5, 5)
h = 0.05

[controls]
basis = "(0, 1)", "(a + b, a)", "(sin(a), a - b)"
lower = -1
upper = 1
initial = (1, 0, 0)

[population mu]
source = cross
center = (0, 0)
arm = 0.25
extent = 1
target = (1, 1)

[population nu]
source = ring
center = (0, 0)
radii = (0.6, 1)
target = (-1, -1)

[algorithm]
backend = grid
alphas = 0.75
explores = (1, -1)
max_outer = 30
intervals = 20
)SCN";

constexpr const char* kMnist36 = R"SCN(# two digit images steered toward (3, 0) and (-3, 0)
# expects mnist36-images.idx next to the working directory: image 0 a "3", image 1 a "6"
name = "mnist36"

[time]
t0 = 0
horizon = 2
steps = 200

[grid]
min = (-6, -6)
max = (6, 6)
h = 0.1

[controls]
basis = "(0, 1)", "(a + b, a)", "(sin(a), a - b)"
lower = -1
upper = 1
initial = (1, 0, 0)

[population three]
source = idx
path = "mnist36-images.idx"
index = 0
threshold = 0.1
offset = (-0.5, -0.5)
target = (3, 0)

[population six]
source = idx
path = "mnist36-images.idx"
index = 1
threshold = 0.1
offset = (-0.5, -0.5)
target = (-3, 0)

[algorithm]
backend = particles
alphas = 0.75
explores = (1, -1)
max_outer = 30
intervals = 20
)SCN";

std::string desk_crossring() {
  std::string t = kCrossRing;
  auto swap = [&](const std::string& from, const std::string& to) {
    const auto at = t.find(from);
    t.replace(at, from.size(), to);
  };
  swap("name = \"crossring\"", "name = \"crossring-desk\"");
  swap("tau = 0.002", "tau = 0.004");
  swap("h = 0.05", "h = 0.1");
  return t;
}

}  // namespace

// ---------------------------------------------------------------- public

GridMeasure blob_density(const GridSpec& grid, const BlobSpec& blob) {
  const double ca = blob.center[0], cb = blob.center[1];
  if (blob.shape == BlobSpec::Shape::Point) {
    if (!grid.contains(ca, cb)) throw ValidationError("center", "point mass outside the grid");
    return GridMeasure::point_mass(grid, ca, cb);
  }
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.na(); ++i)
    for (std::size_t j = 0; j < grid.nb(); ++j) {
      const double da = grid.center_a(i) - ca, db = grid.center_b(j) - cb;
      double v = 0.0;
      switch (blob.shape) {
        case BlobSpec::Shape::Gaussian:
          v = std::exp(-0.5 * (da * da + db * db) / (blob.sigma * blob.sigma));
          break;
        case BlobSpec::Shape::Cross: {
          const bool box = std::abs(da) <= blob.extent && std::abs(db) <= blob.extent;
          v = box && (std::abs(da) <= blob.arm || std::abs(db) <= blob.arm) ? 1.0 : 0.0;
          break;
        }
        case BlobSpec::Shape::Ring: {
          const double r = std::hypot(da, db);
          v = r >= blob.radii[0] && r <= blob.radii[1] ? 1.0 : 0.0;
          break;
        }
        case BlobSpec::Shape::Point:
          break;
      }
      w[grid.index(i, j)] = v;
    }
  if (blob.shape != BlobSpec::Shape::Gaussian) {
    w = triangular_smooth(grid, w);
    w = gaussian_blur(grid, w, blob.blur.value_or(2.0 * std::max(grid.h(0), grid.h(1))));
  }
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0)) throw ValidationError("blob", "shape misses every grid cell");
  return GridMeasure::normalized(grid, std::move(w));
}

std::string Scenario::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(source_text)));
  return buf;
}

std::vector<std::string> builtin_scenarios() { return {"example1", "crossring", "crossring-desk", "mnist36"}; }

std::optional<std::string> builtin_scenario_text(std::string_view name) {
  if (name == "example1") return std::string(kExample1);
  if (name == "crossring") return std::string(kCrossRing);
  if (name == "crossring-desk") return desk_crossring();
  if (name == "mnist36") return std::string(kMnist36);
  return std::nullopt;
}

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  const auto sections = split_sections(text);
  Scenario s;
  s.source_text = std::string(text);

  const Section* time = nullptr;
  const Section* grid = nullptr;
  const Section* controls = nullptr;
  const Section* algorithm = nullptr;
  const Section* output = nullptr;
  std::vector<const Section*> pops;
  for (const auto& sec : sections) {
    if (sec.kind == "time") time = &sec;
    if (sec.kind == "grid") grid = &sec;
    if (sec.kind == "controls") controls = &sec;
    if (sec.kind == "algorithm") algorithm = &sec;
    if (sec.kind == "output") output = &sec;
    if (sec.kind == "population") {
      for (const auto* p : pops)
        if (p->label == sec.label) throw ParseError(sec.line, "duplicate population '" + sec.label + "'");
      pops.push_back(&sec);
    }
  }

  {
    Reader r(sections.front(), "");
    if (const Entry* e = r.get("name")) s.name = to_word(e->value, e->line);
    r.finish();
  }
  if (!time) throw ValidationError("time", "section [time] is required");
  if (!grid) throw ValidationError("grid", "section [grid] is required");
  if (!controls) throw ValidationError("controls", "section [controls] is required");
  if (pops.empty() || pops.size() > 2) throw ValidationError("population", "one or two [population] sections are required");

  {
    Reader r(*time, "time.");
    if (const Entry* e = r.get("t0")) s.t0 = to_number(e->value, e->line);
    const Entry* hz = r.get("horizon");
    if (!hz) throw ValidationError("time.horizon", "required");
    s.horizon = to_number(hz->value, hz->line);
    if (!(s.horizon > s.t0)) throw ValidationError("time.horizon", "must exceed t0");
    const Entry* steps = r.get("steps");
    const Entry* tau = r.get("tau");
    if (steps && tau) throw ValidationError("time.steps", "give either steps or tau, not both");
    if (!steps && !tau) throw ValidationError("time.steps", "steps or tau is required");
    if (steps) {
      s.steps = to_count(steps->value, steps->line);
    } else {
      const double t = to_number(tau->value, tau->line);
      if (!(t > 0)) throw ValidationError("time.tau", "must be positive");
      const double n = (s.horizon - s.t0) / t;
      if (std::abs(n - std::round(n)) > 1e-9 * n) throw ValidationError("time.tau", "must divide the horizon");
      s.steps = static_cast<std::size_t>(std::llround(n));
    }
    if (s.steps == 0) throw ValidationError("time.steps", "must be positive");
    r.finish();
  }

  {
    Reader r(*grid, "grid.");
    const Entry* lo = r.get("min");
    const Entry* hi = r.get("max");
    if (!lo || !hi) throw ValidationError("grid.min", "min and max are required");
    const auto a = to_pair(lo->value, lo->line, "grid.min");
    const auto b = to_pair(hi->value, hi->line, "grid.max");
    if (!(b[0] > a[0] && b[1] > a[1])) throw ValidationError("grid.max", "must exceed min on both axes");
    const Entry* cells = r.get("cells");
    const Entry* h = r.get("h");
    if (cells && h) throw ValidationError("grid.cells", "give either cells or h, not both");
    if (!cells && !h) throw ValidationError("grid.cells", "cells or h is required");
    std::array<std::size_t, 2> n{};
    if (cells) {
      const Vec c = to_tuple(cells->value, cells->line);
      if (c.size() > 2) throw ValidationError("grid.cells", "expected 1 or 2 components");
      for (std::size_t k = 0; k < 2; ++k) {
        const double v = c[c.size() == 1 ? 0 : k];
        if (v < 1 || v != std::floor(v)) throw ValidationError("grid.cells", "must be positive integers");
        n[k] = static_cast<std::size_t>(v);
      }
    } else {
      const double hv = to_number(h->value, h->line);
      if (!(hv > 0)) throw ValidationError("grid.h", "must be positive");
      for (std::size_t k = 0; k < 2; ++k) {
        const double c = (b[k] - a[k]) / hv;
        if (std::abs(c - std::round(c)) > 1e-9 * c) throw ValidationError("grid.h", "must divide the domain");
        n[k] = static_cast<std::size_t>(std::llround(c));
      }
    }
    if (n[0] < 3 || n[1] < 3) throw ValidationError("grid.cells", "at least 3 cells per axis");
    s.grid = GridSpec(a, b, n);
    r.finish();
  }

  {
    Reader r(*controls, "controls.");
    const Entry* basis = r.get("basis");
    if (!basis) throw ValidationError("controls.basis", "required");
    for (const auto& src : to_strings(basis->value, basis->line)) {
      s.basis.push_back(parse_field_at(src, "controls.basis"));
      check_field(s.basis.back(), "controls.basis");
    }
    const std::size_t m = s.basis.size();
    const Entry* lo = r.get("lower");
    const Entry* hi = r.get("upper");
    s.lower = broadcast(lo ? to_tuple(lo->value, lo->line) : Vec{-1.0}, m, "controls.lower");
    s.upper = broadcast(hi ? to_tuple(hi->value, hi->line) : Vec{1.0}, m, "controls.upper");
    for (std::size_t k = 0; k < m; ++k)
      if (!(s.lower[k] <= s.upper[k])) throw ValidationError("controls.upper", "must be >= lower");
    const Entry* init = r.get("initial");
    s.initial = broadcast(init ? to_tuple(init->value, init->line) : Vec{0.0}, m, "controls.initial");
    for (std::size_t k = 0; k < m; ++k)
      if (s.initial[k] < s.lower[k] || s.initial[k] > s.upper[k])
        throw ValidationError("controls.initial", "outside the control box");
    r.finish();
  }

  for (const auto* p : pops) s.populations.push_back(read_population(*p, base_dir));

  if (algorithm) {
    Reader r(*algorithm, "algorithm.");
    AlgorithmConfig& a = s.algorithm;
    if (const Entry* e = r.get("backend")) {
      const std::string b = to_word(e->value, e->line);
      if (b == "grid") a.backend = BackendKind::Grid;
      else if (b == "particles") a.backend = BackendKind::Particles;
      else throw ValidationError("algorithm.backend", "expected grid or particles");
    }
    if (const Entry* e = r.get("particles")) {
      a.particles = to_count(e->value, e->line);
      if (a.particles == 0) throw ValidationError("algorithm.particles", "must be positive");
    }
    if (const Entry* e = r.get("rk4_steps")) {
      a.rk4_steps = to_count(e->value, e->line);
      if (a.rk4_steps == 0) throw ValidationError("algorithm.rk4_steps", "must be positive");
    }
    if (const Entry* e = r.get("seed")) a.seed = static_cast<std::uint64_t>(to_count(e->value, e->line));
    FmpParams& f = a.fmp;
    if (const Entry* e = r.get("eps1")) {
      f.eps1 = to_number(e->value, e->line);
      if (*f.eps1 < 0) throw ValidationError("algorithm.eps1", "must be nonnegative");
    }
    if (const Entry* e = r.get("eps2")) {
      f.eps2 = to_number(e->value, e->line);
      if (!(*f.eps2 > 0)) throw ValidationError("algorithm.eps2", "must be positive");
    }
    if (const Entry* e = r.get("eps_tie")) {
      f.eps_tie = to_number(e->value, e->line);
      if (*f.eps_tie < 0) throw ValidationError("algorithm.eps_tie", "must be nonnegative");
    }
    if (const Entry* e = r.get("alphas")) {
      f.alphas = to_tuple(e->value, e->line);
      for (double al : f.alphas)
        if (al < 0 || al > 1) throw ValidationError("algorithm.alphas", "each weight must lie in [0, 1]");
    }
    if (const Entry* e = r.get("explores")) {
      f.explores.clear();
      for (double x : to_tuple(e->value, e->line)) {
        if (x != 1.0 && x != -1.0) throw ValidationError("algorithm.explores", "entries must be 1 or -1");
        f.explores.push_back(static_cast<int>(x));
      }
    }
    if (const Entry* e = r.get("max_outer")) f.max_outer = to_count(e->value, e->line);
    if (const Entry* e = r.get("intervals")) {
      f.initial_intervals = to_count(e->value, e->line);
      if (f.initial_intervals == 0) throw ValidationError("algorithm.intervals", "must be positive");
    }
    if (const Entry* e = r.get("scheme")) {
      const std::string sc = to_word(e->value, e->line);
      if (sc == "u") f.scheme = SamplingScheme::U;
      else if (sc == "ou") f.scheme = SamplingScheme::OU;
      else throw ValidationError("algorithm.scheme", "expected u or ou");
    }
    r.finish();
  }

  if (output) {
    Reader r(*output, "output.");
    if (const Entry* e = r.get("dir")) s.output_dir = resolve(base_dir, to_string_value(e->value, e->line));
    if (const Entry* e = r.get("frame_stride")) s.frame_stride = to_count(e->value, e->line);
    r.finish();
  }
  if (s.name.empty()) s.name = "scenario";

  const double cfl = cfl_estimate(s);
  if (cfl > 1.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "CFL pre-estimate %.3g exceeds 1 at tau = %.3g; steps will be sub-stepped", cfl,
                  (s.horizon - s.t0) / static_cast<double>(s.steps));
    s.warnings.emplace_back(buf);
  }
  return s;
}

Scenario load_scenario(const std::string& path_or_builtin) {
  if (auto text = builtin_scenario_text(path_or_builtin)) return parse_scenario(*text, std::filesystem::current_path());
  const std::filesystem::path path(path_or_builtin);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("scenario", "cannot read '" + path_or_builtin + "' (not a file or built-in name)");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.parent_path());
}

namespace {

EmpiricalMeasure place_image(const EmpiricalMeasure& unit, const SourceSpec& src) {
  std::vector<Vec> pts;
  pts.reserve(unit.size());
  for (const auto& p : unit.points())
    pts.push_back({src.offset[0] + src.image_scale * p[0], src.offset[1] + src.image_scale * p[1]});
  return EmpiricalMeasure(std::move(pts), unit.weights());
}

}  // namespace

Problem make_problem(const Scenario& s, BackendKind backend) {
  std::vector<VectorField> basis;
  for (const auto& f : s.basis) basis.push_back(VectorField::from_expr(f));
  std::vector<PopulationSpec> pops;
  for (std::size_t k = 0; k < s.populations.size(); ++k) {
    const PopulationConfig& pc = s.populations[k];
    const std::string field = "population." + pc.name;
    ScalarField cost = pc.cost ? ScalarField::from_expr(*pc.cost)
                               : ScalarField::squared_distance({(*pc.target)[0], (*pc.target)[1]});
    std::optional<GridMeasure> grid;
    std::optional<EmpiricalMeasure> atoms;
    const SourceSpec& src = pc.source;
    const std::uint64_t seed = s.algorithm.seed + k;
    switch (src.kind) {
      case SourceSpec::Kind::Blob:
        if (src.blob.shape == BlobSpec::Shape::Point) {
          if (!s.grid.contains(src.blob.center[0], src.blob.center[1]))
            throw ValidationError(field + ".center", "point mass outside the grid");
          if (backend == BackendKind::Grid) grid = blob_density(s.grid, src.blob);
          else atoms = EmpiricalMeasure::dirac({src.blob.center[0], src.blob.center[1]});
        } else {
          grid = blob_density(s.grid, src.blob);
          if (backend == BackendKind::Particles) atoms = grid_to_empirical(*grid, s.algorithm.particles, seed);
        }
        break;
      case SourceSpec::Kind::GridCsv: {
        const GridField f = read_grid_csv(src.path);
        bool same = f.spec.cells() == s.grid.cells();
        for (std::size_t k = 0; k < 2 && same; ++k)
          same = std::abs(f.spec.domain_min()[k] - s.grid.domain_min()[k]) <= 1e-9 * s.grid.h(k) + 1e-12 &&
                 std::abs(f.spec.domain_max()[k] - s.grid.domain_max()[k]) <= 1e-9 * s.grid.h(k) + 1e-12;
        if (!same) throw ValidationError(field + ".path", "grid CSV does not match the scenario grid");
        for (double v : f.values)
          if (v < 0) throw ValidationError(field + ".path", "negative density");
        grid = GridMeasure::normalized(s.grid, f.values);
        if (backend == BackendKind::Particles) atoms = grid_to_empirical(*grid, s.algorithm.particles, seed);
        break;
      }
      case SourceSpec::Kind::EmpiricalCsv:
        atoms = read_empirical_csv(src.path);
        break;
      case SourceSpec::Kind::Pgm:
        atoms = place_image(image_to_measure(read_pgm(src.path), src.threshold), src);
        break;
      case SourceSpec::Kind::Idx: {
        const auto images = read_idx_images(src.path);
        if (src.index >= images.size())
          throw ValidationError(field + ".index", "file holds " + std::to_string(images.size()) + " images");
        atoms = place_image(image_to_measure(images[src.index], src.threshold), src);
        break;
      }
    }
    if (atoms) {
      if (atoms->dim() != 2) throw DimensionMismatch(2, atoms->dim());
      for (const auto& p : atoms->points())
        if (!s.grid.contains(p[0], p[1])) throw ValidationError(field, "atoms lie outside the grid");
      if (backend == BackendKind::Grid && !grid) grid = GridMeasure::deposit(s.grid, atoms->points(), atoms->weights());
    }
    pops.push_back(PopulationSpec{VectorField::from_expr(pc.drift), std::move(cost), std::move(grid), std::move(atoms)});
  }
  return Problem{std::move(basis), s.control_set(), s.time_grid(), s.grid, std::move(pops)};
}

std::unique_ptr<Backend> make_backend(const Scenario& s, BackendKind backend) {
  Problem p = make_problem(s, backend);
  if (backend == BackendKind::Grid) return std::make_unique<GridBackend>(std::move(p));
  return std::make_unique<ParticleBackend>(std::move(p), s.algorithm.rk4_steps);
}

}  // namespace msteer
