#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace zitterwalk {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters: grids, fields, thresholds, config values.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// An analysis needs data at a resolution the input does not carry
/// (thinned paths, missing time steps, non-aligned scales).
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Too few paths, samples or occupied bins to compute the requested quantity.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Where in a simulation a numeric failure happened.
struct EvaluationSite {
  double t = 0.0;
  double x = 0.0;
  std::optional<std::uint64_t> step;
  std::optional<std::uint64_t> path_id;

  [[nodiscard]] std::string describe() const;
};

/// A coefficient returned a non-finite value, or the state left the reals.
class NumericDomainError : public Error {
 public:
  NumericDomainError(const std::string& what, EvaluationSite site);

  [[nodiscard]] const EvaluationSite& site() const noexcept { return site_; }
  [[nodiscard]] const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
  EvaluationSite site_;
};

/// Volatility evaluated to a value <= 0.
class DegenerateVolatilityError : public NumericDomainError {
 public:
  DegenerateVolatilityError(double volatility, EvaluationSite site);

  [[nodiscard]] double volatility() const noexcept { return volatility_; }

 private:
  double volatility_;
};

}  // namespace zitterwalk
