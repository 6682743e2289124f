#include "cgp/objectives.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "cgp/errors.hpp"

namespace cgp {

using std::numbers::pi;

Direction direction_from_string(const std::string& s) {
  if (s == "maximize" || s == "max") return Direction::maximize;
  if (s == "minimize" || s == "min") return Direction::minimize;
  throw ConfigError("direction must be maximize or minimize (got '" + s + "')");
}

double KnownOptimum::distance_to(std::span<const double> x) const {
  if (distance) return distance(x);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (x[i] - p[i]) * (x[i] - p[i]);
    best = std::min(best, std::sqrt(s));
  }
  return best;
}

double f0(double x) { return x == 0.0 ? 0.0 : std::pow(std::abs(x), 1.5) * std::sin(1.0 / x); }

double f1(double x) { return x < 0.0 ? -x + 1.0 : x * x; }

double f2(double x1, double x2) {
  const double r = std::hypot(x1, x2);
  return r > 1.0 ? r - 1.0 : std::pow(r - 1.0, 4);
}

double f3(double x1, double x2) {
  return 1.0 / (1.0 + (x1 - 0.25) * (x1 - 0.25) + (x2 - 0.25) * (x2 - 0.25));
}

double f4(double x1, double x2) {
  return x2 > 0.0 ? f3(x1, x2) : 0.25 / (1.0 + x1 * x1 + x2 * x2);
}

double bukin_n6(double x1, double x2) {
  return 100.0 * std::sqrt(std::abs(x2 - 0.01 * x1 * x1)) + 0.01 * std::abs(x1 + 10.0);
}

double easom(double x1, double x2) {
  return -std::cos(x1) * std::cos(x2) * std::exp(-(x1 - pi) * (x1 - pi) - (x2 - pi) * (x2 - pi));
}

double michalewicz(double x1, double x2) {
  return -std::sin(x1) * std::pow(std::sin(x1 * x1 / pi), 20) -
         std::sin(x2) * std::pow(std::sin(2.0 * x2 * x2 / pi), 20);
}

double schaffer_n2(double x1, double x2) {
  const double s = std::sin(x1 * x1 - x2 * x2);
  const double d = 1.0 + 0.001 * (x1 * x1 + x2 * x2);
  return 0.5 + (s * s - 0.5) / (d * d);
}

double holder_table(double x1, double x2) {
  return -std::abs(std::sin(x1) * std::cos(x2) *
                   std::exp(std::abs(1.0 - std::hypot(x1, x2) / pi)));
}

double cross_in_tray(double x1, double x2) {
  const double inner = std::abs(std::sin(x1) * std::sin(x2) *
                                std::exp(std::abs(100.0 - std::hypot(x1, x2) / pi)));
  return -0.0001 * std::pow(inner + 1.0, 0.1);
}

SearchSpace piston_space() {
  return SearchSpace({DimensionSpec::continuous(30, 60), DimensionSpec::continuous(0.005, 0.020),
                      DimensionSpec::continuous(0.002, 0.010), DimensionSpec::continuous(1000, 5000),
                      DimensionSpec::continuous(90000, 110000), DimensionSpec::continuous(290, 296),
                      DimensionSpec::continuous(340, 360)});
}

double piston(std::span<const double> x) {
  static const SearchSpace space = piston_space();
  if (!space.contains(x)) {
    space.normalize(x);  // throws with the offending coordinate
    throw DomainError("piston: point outside the standard ranges");
  }
  const double M = x[0], S = x[1], V0 = x[2], k = x[3], P0 = x[4], Ta = x[5], T0 = x[6];
  const double A = P0 * S + 19.62 * M - k * V0 / S;
  const double V = S / (2.0 * k) * (std::sqrt(A * A + 4.0 * k * (P0 * V0 / T0) * Ta) - A);
  return 2.0 * pi * std::sqrt(M / (k + S * S * (P0 * V0 / T0) * (Ta / (V * V))));
}

namespace {

// Peak envelope of the first regime. Multiples of 8 sit on the envelope;
// other block sizes dip below it.
constexpr std::array<std::pair<int, double>, 15> kRegimeOneEnvelope = {{
    {1, 350.0},
    {16, 1200.0},
    {32, 1620.0},
    {48, 1830.0},
    {64, 1920.0},
    {80, 1962.0},
    {96, 1984.0},
    {104, 1994.0},
    {112, 2010.702},
    {120, 2001.35},
    {128, 2000.758},
    {136, 1925.0},
    {144, 1850.0},
    {152, 1790.0},
    {159, 1760.0},
}};

double envelope_one(int b) {
  for (std::size_t i = 1; i < kRegimeOneEnvelope.size(); ++i) {
    const auto [b1, v1] = kRegimeOneEnvelope[i];
    if (b <= b1) {
      const auto [b0, v0] = kRegimeOneEnvelope[i - 1];
      return v0 + (v1 - v0) * static_cast<double>(b - b0) / static_cast<double>(b1 - b0);
    }
  }
  return kRegimeOneEnvelope.back().second;
}

// Deterministic roughness in [-1, 1].
double roughness(int b) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(b) * 0x2545f4914f6cdd1dULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

int distance_to_multiple_of_8(int b) {
  const int r = b % 8;
  return std::min(r, 8 - r);
}

}  // namespace

double matmul_like_value(int b) {
  if (b < 1 || b > 1000) throw DomainError("matmul_like: block size outside [1, 1000]");
  const int m = distance_to_multiple_of_8(b);
  if (b < 160) {
    const double dip = m == 0 ? 0.0 : 15.0 + 2.5 * m;
    return envelope_one(b) - dip;
  }
  if (b < 500) {
    const double trend = 1650.0 - 0.1 * (b - 160) - 0.8 * std::max(0, b - 400);
    const double ripple = m == 0 ? 18.0 : -4.0 * m;
    return trend + 10.0 * roughness(b) + ripple;
  }
  const double trend = 1050.0 + 300.0 * std::exp(-(b - 500) / 40.0);
  const double ripple = m == 0 ? 8.0 : -2.0 * m;
  return trend + 5.0 * roughness(b) + ripple;
}

std::vector<std::string> synthetic_names() {
  return {"f0",     "f1",          "f2",           "f3",           "f4",          "bukin_n6",
          "easom",  "michalewicz", "schaffer_n2",  "holder_table", "cross_in_tray", "piston",
          "matmul_like"};
}

namespace {

Objective planar(std::string name, double lo1, double hi1, double lo2, double hi2,
                 Direction dir, double (*f)(double, double), std::optional<KnownOptimum> known) {
  Objective o{std::move(name),
              SearchSpace({DimensionSpec::continuous(lo1, hi1), DimensionSpec::continuous(lo2, hi2)}),
              dir, [f](std::span<const double> x) { return f(x[0], x[1]); }, std::move(known)};
  return o;
}

KnownOptimum at(std::vector<Point> points, double value) {
  return KnownOptimum{std::move(points), value, {}};
}

}  // namespace

Objective synthetic(const std::string& name) {
  const auto max = Direction::maximize;
  const auto min = Direction::minimize;
  if (name == "f0")
    return {name, SearchSpace({DimensionSpec::continuous(0, 1)}), min,
            [](std::span<const double> x) { return f0(x[0]); }, std::nullopt};
  if (name == "f1")
    return {name, SearchSpace({DimensionSpec::continuous(-1, 1)}), min,
            [](std::span<const double> x) { return f1(x[0]); }, at({{0.0}}, 0.0)};
  if (name == "f2") {
    KnownOptimum circle{{{1.0, 0.0}}, 0.0, [](std::span<const double> x) {
                          return std::abs(std::hypot(x[0], x[1]) - 1.0);
                        }};
    return planar(name, -2, 2, -2, 2, min, f2, circle);
  }
  if (name == "f3") return planar(name, -1, 1, -1, 1, max, f3, at({{0.25, 0.25}}, 1.0));
  if (name == "f4") return planar(name, -1, 1, -1, 1, max, f4, at({{0.25, 0.25}}, 1.0));
  if (name == "bukin_n6")
    return planar(name, -15, 5, -3, 3, min, bukin_n6, at({{-10.0, 1.0}}, 0.0));
  if (name == "easom") return planar(name, -10, 10, -10, 10, min, easom, at({{pi, pi}}, -1.0));
  if (name == "michalewicz")
    return planar(name, 0, 4, 0, 4, min, michalewicz, at({{2.20, 1.57}}, -1.8013));
  if (name == "schaffer_n2")
    return planar(name, -2, 2, -2, 2, min, schaffer_n2, at({{0.0, 0.0}}, 0.0));
  if (name == "holder_table")
    return planar(name, -10, 10, -10, 10, min, holder_table,
                  at({{8.05502, 9.66459}, {-8.05502, 9.66459}, {8.05502, -9.66459}, {-8.05502, -9.66459}},
                     -19.2085));
  if (name == "cross_in_tray")
    return planar(name, -10, 10, -10, 10, min, cross_in_tray,
                  at({{1.3494, 1.3494}, {-1.3494, 1.3494}, {1.3494, -1.3494}, {-1.3494, -1.3494}},
                     -2.06261218));
  if (name == "piston")
    return {name, piston_space(), min, [](std::span<const double> x) { return piston(x); },
            std::nullopt};
  if (name == "matmul_like") return matmul_like();

  std::string list;
  for (const auto& n : synthetic_names()) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("unknown objective '" + name + "' (known: " + list + ")");
}

Objective matmul_like() {
  return {"matmul_like", SearchSpace({DimensionSpec::integer(1, 1000)}), Direction::maximize,
          [](std::span<const double> x) {
            if (std::floor(x[0]) != x[0]) throw EvaluationError("matmul_like: non-integer block size");
            return matmul_like_value(static_cast<int>(x[0]));
          },
          at({{112.0}}, 2010.702)};
}

ReplayTable::ReplayTable(SearchSpace space, std::map<Point, double> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (values_.empty()) throw ConfigError("replay table is empty");
  for (const auto& [x, y] : values_) {
    if (x.size() != space_.dim()) throw ConfigError("replay row dimension does not match space");
    if (!space_.on_lattice(x)) throw ConfigError("replay table contains a point off the space lattice");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& text, bool* ok) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
  if (begin < end && *begin == '+') ++begin;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  *ok = (ec == std::errc() && ptr == end && begin != end);
  return v;
}

}  // namespace

ReplayTable ReplayTable::load(const std::string& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open replay table '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("replay table '" + path + "' is empty");
  const auto header = split_csv_line(line);
  if (header.size() != space.dim() + 1)
    throw ConfigError("replay header must have " + std::to_string(space.dim() + 1) + " columns");
  std::map<Point, double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ConfigError("replay line " + std::to_string(lineno) + ": wrong column count");
    Point x(space.dim());
    double y = 0.0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      bool ok = false;
      const double v = parse_number(fields[i], &ok);
      if (!ok) throw ConfigError("replay line " + std::to_string(lineno) + ": bad number '" + fields[i] + "'");
      if (i < space.dim())
        x[i] = v;
      else
        y = v;
    }
    values[x] = y;
  }
  return ReplayTable(space, std::move(values));
}

double ReplayTable::lookup(std::span<const double> raw) const {
  const auto it = values_.find(Point(raw.begin(), raw.end()));
  if (it == values_.end()) {
    std::string where;
    for (double v : raw) where += (where.empty() ? "" : ", ") + format_double(v);
    throw EvaluationError("replay table has no entry at (" + where + ")");
  }
  return it->second;
}

Objective replay(std::shared_ptr<const ReplayTable> table, Direction direction) {
  auto best = table->values().begin();
  for (auto it = table->values().begin(); it != table->values().end(); ++it)
    if (better(it->second, best->second, direction)) best = it;
  KnownOptimum known{{best->first}, best->second, {}};
  SearchSpace space = table->space();
  return {"replay", std::move(space), direction,
          [table](std::span<const double> x) { return table->lookup(x); }, std::move(known)};
}

Objective with_noise(Objective base, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw DomainError("noise sigma must be >= 0");
  if (sigma == 0.0) return base;
  auto rng = std::make_shared<Rng>(Rng(seed).derive("noise"));
  base.fn = [inner = std::move(base.fn), rng, sigma](std::span<const double> x) {
    return inner(x) + sigma * rng->normal();
  };
  return base;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string render_command(const std::string& command_template, std::span<const double> raw) {
  std::string out = command_template;
  // Highest index first so {x1} is not matched inside {x10}.
  for (std::size_t i = raw.size(); i-- > 0;) {
    const std::string key = "{x" + std::to_string(i) + "}";
    const double v = raw[i];
    std::string value;
    if (std::floor(v) == v && std::abs(v) < 1e15)
      value = std::to_string(static_cast<long long>(v));
    else
      value = format_double(v);
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
      out.replace(pos, key.size(), value);
  }
  return out;
}

double parse_last_line(const std::string& output) {
  std::istringstream is(output);
  std::string line, last;
  while (std::getline(is, line)) {
    bool blank = std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
    if (!blank) last = line;
  }
  bool ok = false;
  const double v = parse_number(last, &ok);
  if (!ok) throw EvaluationError("command output's last line is not a number: '" + last + "'", output);
  return v;
}

}  // namespace cgp
