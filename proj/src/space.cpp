#include "cgp/space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cgp/errors.hpp"

namespace cgp {

DimensionSpec DimensionSpec::continuous(double lower, double upper) {
  DimensionSpec d{lower, upper, DimKind::continuous, 1};
  d.validate();
  return d;
}

DimensionSpec DimensionSpec::integer(double lower, double upper) {
  DimensionSpec d{lower, upper, DimKind::integer, 1};
  d.validate();
  return d;
}

DimensionSpec DimensionSpec::stepped(double lower, double upper, long step) {
  DimensionSpec d{lower, upper, DimKind::integer_step, step};
  d.validate();
  return d;
}

void DimensionSpec::validate() const {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    std::ostringstream os;
    os << "dimension bounds must satisfy lower < upper (got " << lower << ", " << upper << ")";
    throw DomainError(os.str());
  }
  if (kind == DimKind::continuous) return;
  if (std::floor(lower) != lower || std::floor(upper) != upper)
    throw DomainError("integer dimension requires integral bounds");
  if (kind == DimKind::integer_step) {
    if (step <= 0) throw DomainError("step must be a positive integer");
    const auto span = static_cast<long long>(upper - lower);
    if (span % step != 0) throw DomainError("upper - lower must be a multiple of step");
  }
}

double DimensionSpec::quantize(double raw) const {
  double q = raw;
  switch (kind) {
    case DimKind::continuous:
      break;
    case DimKind::integer:
      q = std::round(raw);
      break;
    case DimKind::integer_step:
      q = lower + static_cast<double>(step) * std::round((raw - lower) / static_cast<double>(step));
      break;
  }
  return std::clamp(q, lower, upper);
}

SearchSpace::SearchSpace(std::vector<DimensionSpec> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw DomainError("search space needs at least one dimension");
  for (const auto& d : dims_) d.validate();
}

Point SearchSpace::normalize(std::span<const double> raw) const {
  if (raw.size() != dim()) throw DomainError("point dimension does not match search space");
  Point unit(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    const auto& d = dims_[i];
    if (!(raw[i] >= d.lower && raw[i] <= d.upper)) {
      std::ostringstream os;
      os << "coordinate x" << i << " = " << raw[i] << " outside [" << d.lower << ", " << d.upper
         << "]";
      throw DomainError(os.str());
    }
    unit[i] = (raw[i] - d.lower) / d.width();
  }
  return unit;
}

Point SearchSpace::to_raw(std::span<const double> unit) const {
  if (unit.size() != dim()) throw DomainError("point dimension does not match search space");
  Point raw(dim());
  for (std::size_t i = 0; i < dim(); ++i) raw[i] = dims_[i].lower + unit[i] * dims_[i].width();
  return raw;
}

Point SearchSpace::denormalize(std::span<const double> unit) const {
  Point raw = to_raw(unit);
  for (std::size_t i = 0; i < dim(); ++i) raw[i] = dims_[i].quantize(raw[i]);
  return raw;
}

Point SearchSpace::random_unit_point(Rng& rng) const {
  Point u(dim());
  for (auto& c : u) c = rng.uniform();
  return u;
}

bool SearchSpace::contains(std::span<const double> raw) const {
  if (raw.size() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (!(raw[i] >= dims_[i].lower && raw[i] <= dims_[i].upper)) return false;
  return true;
}

bool SearchSpace::on_lattice(std::span<const double> raw) const {
  if (!contains(raw)) return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (dims_[i].quantize(raw[i]) != raw[i]) return false;
  return true;
}

bool SearchSpace::has_discrete_dims() const {
  return std::any_of(dims_.begin(), dims_.end(),
                     [](const DimensionSpec& d) { return d.kind != DimKind::continuous; });
}

std::string to_string(DimKind kind) {
  switch (kind) {
    case DimKind::continuous:
      return "continuous";
    case DimKind::integer:
      return "integer";
    case DimKind::integer_step:
      return "integer-step";
  }
  return "continuous";
}

DimKind dim_kind_from_string(const std::string& s) {
  if (s == "continuous" || s == "real") return DimKind::continuous;
  if (s == "integer" || s == "int") return DimKind::integer;
  if (s == "integer-step" || s == "step") return DimKind::integer_step;
  throw ConfigError("unknown dimension kind '" + s + "' (continuous, integer, integer-step)");
}

}  // namespace cgp
