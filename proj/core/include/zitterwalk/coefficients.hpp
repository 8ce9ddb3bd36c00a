#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace zitterwalk {

/// hbar and mass; the diffusion scale of the walk is hbar / mass.
/// Natural units (hbar = mass = 1) are the default.
struct PhysicalScale {
  double hbar = 1.0;
  double mass = 1.0;

  [[nodiscard]] double diffusion() const noexcept { return hbar / mass; }
  /// Throws ConfigurationError unless hbar, mass > 0 and hbar / mass is finite and positive.
  void validate() const;
};

enum class FieldKind { constant, ou_nelson, user };

[[nodiscard]] std::string_view to_string(FieldKind kind) noexcept;

/// Drift b(t, x) and volatility sigma(t, x) of the walk
///   x(t + dt) = x(t) + b(t, x) dt + sigma(t, x) eps(t) sqrt(dt).
///
/// The constant and ou_nelson kinds are evaluated in closed form; user fields
/// wrap arbitrary callables. A user volatility may additionally see the sign of
/// the previous noise draw, which makes the field deliberately non-Markov; the
/// Markov diagnostic uses this to construct counterexamples.
class CoefficientField {
 public:
  using Function = std::function<double(double t, double x)>;
  using HistoryFunction = std::function<double(double t, double x, int previous_noise)>;

  [[nodiscard]] static CoefficientField constant(double drift, double volatility);
  /// b(t, x) = -omega x, sigma constant.
  [[nodiscard]] static CoefficientField ou_nelson(double omega, double volatility);
  [[nodiscard]] static CoefficientField user(Function drift, Function volatility,
                                             std::string label = "user");
  [[nodiscard]] static CoefficientField history_dependent(Function drift,
                                                          HistoryFunction volatility,
                                                          std::string label = "history");

  [[nodiscard]] FieldKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& label() const noexcept { return label_; }
  /// False only for history-dependent fields.
  [[nodiscard]] bool markov() const noexcept { return !history_volatility_; }
  /// True when neither coefficient depends on x (constant fields).
  [[nodiscard]] bool state_independent() const noexcept { return kind_ == FieldKind::constant; }

  /// Closed-form parameters; meaningful for constant / ou_nelson kinds only.
  [[nodiscard]] double constant_drift() const noexcept { return drift_constant_; }
  [[nodiscard]] double constant_volatility() const noexcept { return volatility_constant_; }
  [[nodiscard]] double omega() const noexcept { return omega_; }

  [[nodiscard]] double drift(double t, double x) const {
    switch (kind_) {
      case FieldKind::constant: return drift_constant_;
      case FieldKind::ou_nelson: return -omega_ * x;
      case FieldKind::user: break;
    }
    return drift_fn_(t, x);
  }

  /// previous_noise is eps(t - dt), or 0 at the first step.
  [[nodiscard]] double volatility(double t, double x, int previous_noise = 0) const {
    switch (kind_) {
      case FieldKind::constant:
      case FieldKind::ou_nelson: return volatility_constant_;
      case FieldKind::user: break;
    }
    return history_volatility_ ? history_volatility_(t, x, previous_noise) : volatility_fn_(t, x);
  }

 private:
  CoefficientField() = default;

  FieldKind kind_ = FieldKind::constant;
  std::string label_;
  double drift_constant_ = 0.0;
  double volatility_constant_ = 1.0;
  double omega_ = 0.0;
  Function drift_fn_;
  Function volatility_fn_;
  HistoryFunction history_volatility_;
};

/// "free": b = 0, sigma = sqrt(hbar/m). "ou_nelson": b = -omega x, sigma = sqrt(hbar/m).
/// Throws ConfigurationError for an unknown name or a missing / non-positive omega.
[[nodiscard]] CoefficientField builtin_field(std::string_view name, const PhysicalScale& scale,
                                             std::optional<double> omega = std::nullopt);

/// Largest finite-difference slope |f(t, x + h) - f(t, x)| / h of drift and
/// volatility over a regular sample of [t_lo, t_hi] x [x_lo, x_hi].
struct LipschitzProbe {
  double drift_slope = 0.0;
  double volatility_slope = 0.0;

  [[nodiscard]] double max() const noexcept {
    return drift_slope > volatility_slope ? drift_slope : volatility_slope;
  }
};

[[nodiscard]] LipschitzProbe probe_lipschitz(const CoefficientField& field, double t_lo,
                                             double t_hi, double x_lo, double x_hi,
                                             int samples_per_axis = 32);

}  // namespace zitterwalk
