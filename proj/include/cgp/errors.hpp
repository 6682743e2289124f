#pragma once

#include <stdexcept>
#include <string>

namespace cgp {

/// A coordinate or argument outside the domain an operation accepts.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear algebra failed even after jitter escalation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (CLI flags, config files, registry names).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An objective could not produce a value. `output` carries whatever the
/// evaluation printed, when there is any.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what, std::string output = {})
      : std::runtime_error(what), output_(std::move(output)) {}

  const std::string& output() const noexcept { return output_; }

 private:
  std::string output_;
};

}  // namespace cgp
