#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cgp/rng.hpp"

namespace cgp {

using Point = std::vector<double>;

enum class DimKind { continuous, integer, integer_step };

/// One coordinate of the search box. Integer kinds require integral bounds;
/// stepped dimensions live on lower + m * step.
struct DimensionSpec {
  double lower = 0.0;
  double upper = 1.0;
  DimKind kind = DimKind::continuous;
  long step = 1;

  static DimensionSpec continuous(double lower, double upper);
  static DimensionSpec integer(double lower, double upper);
  static DimensionSpec stepped(double lower, double upper, long step);

  /// Throws DomainError when the invariants do not hold.
  void validate() const;
  double width() const noexcept { return upper - lower; }
  double quantize(double raw) const;
};

/// Immutable box domain together with its affine map onto the unit cube.
class SearchSpace {
 public:
  explicit SearchSpace(std::vector<DimensionSpec> dims);

  std::size_t dim() const noexcept { return dims_.size(); }
  const std::vector<DimensionSpec>& dims() const noexcept { return dims_; }
  const DimensionSpec& operator[](std::size_t i) const { return dims_[i]; }

  /// Raw coordinates to [0,1]^d. Throws DomainError naming the first
  /// coordinate outside its bounds.
  Point normalize(std::span<const double> raw) const;
  /// Inverse map with rounding onto the lattice, clamped to the bounds.
  Point denormalize(std::span<const double> unit) const;
  /// Inverse affine map without quantization.
  Point to_raw(std::span<const double> unit) const;

  Point random_unit_point(Rng& rng) const;

  bool contains(std::span<const double> raw) const;
  bool on_lattice(std::span<const double> raw) const;
  bool has_discrete_dims() const;

 private:
  std::vector<DimensionSpec> dims_;
};

std::string to_string(DimKind kind);
DimKind dim_kind_from_string(const std::string& s);

}  // namespace cgp
