#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgp/direction.hpp"
#include "cgp/rng.hpp"
#include "cgp/space.hpp"

namespace cgp {

/// Known optimum of an objective. `points` may hold several optimizers; a
/// custom distance replaces the nearest-point rule for continuous optimum
/// sets (e.g. a circle).
struct KnownOptimum {
  std::vector<Point> points;
  double value = 0.0;
  std::function<double(std::span<const double>)> distance;

  /// L2 distance in raw coordinates from `x` to the nearest optimizer.
  double distance_to(std::span<const double> x) const;
};

using EvalFn = std::function<double(std::span<const double> raw)>;

/// A black-box function over a search space.
struct Objective {
  std::string name;
  SearchSpace space;
  Direction direction = Direction::minimize;
  EvalFn fn;
  std::optional<KnownOptimum> known;

  /// Throws EvaluationError when the function cannot produce a value.
  double operator()(std::span<const double> raw) const { return fn(raw); }
};

// Formulas of the synthetic suite, in raw coordinates.
double f0(double x);
double f1(double x);
double f2(double x1, double x2);
double f3(double x1, double x2);
double f4(double x1, double x2);
double bukin_n6(double x1, double x2);
double easom(double x1, double x2);
double michalewicz(double x1, double x2);
double schaffer_n2(double x1, double x2);
double holder_table(double x1, double x2);
double cross_in_tray(double x1, double x2);

/// Piston cycle time over (M, S, V0, k, P0, Ta, T0). Throws DomainError
/// outside the standard ranges.
double piston(std::span<const double> x);
SearchSpace piston_space();

/// Regime-structured stand-in for blocked matrix-multiply speed over block
/// sizes b in [1, 1000]. Global maximum 2010.702 at b = 112.
double matmul_like_value(int b);

/// Names accepted by synthetic().
std::vector<std::string> synthetic_names();

/// Registry lookup. Throws ConfigError listing the registry for unknown names.
Objective synthetic(const std::string& name);

/// Exact lookup table over a lattice.
class ReplayTable {
 public:
  ReplayTable(SearchSpace space, std::map<Point, double> values);

  /// Reads a header-bearing CSV (x0,...,x{d-1},y).
  static ReplayTable load(const std::string& path, const SearchSpace& space);

  const SearchSpace& space() const noexcept { return space_; }
  const std::map<Point, double>& values() const noexcept { return values_; }
  /// Throws EvaluationError when `raw` is not a recorded point.
  double lookup(std::span<const double> raw) const;

 private:
  SearchSpace space_;
  std::map<Point, double> values_;
};

/// Maximum of the table is recorded as the known optimum.
Objective replay(std::shared_ptr<const ReplayTable> table, Direction direction);
Objective matmul_like();

/// Adds i.i.d. N(0, sigma^2) noise; the stream is owned by the returned
/// objective and seeded by `seed`.
Objective with_noise(Objective base, double sigma, std::uint64_t seed);

/// Substitutes {x0}..{x(d-1)} in `command_template`, runs it through
/// /bin/sh, and parses the last non-empty line of stdout as the value.
/// Nonzero exit, timeout and unparsable output raise EvaluationError with
/// the captured output attached.
Objective external_command(std::string command_template, SearchSpace space, Direction direction,
                           std::chrono::milliseconds timeout);

/// Substitution used by external_command; integral coordinates are printed
/// without a decimal point.
std::string render_command(const std::string& command_template, std::span<const double> raw);

/// Parse rule used by external_command.
double parse_last_line(const std::string& output);

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);

}  // namespace cgp
