#include "zitterwalk/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "zitterwalk/error.hpp"

namespace zitterwalk {

void PhysicalScale::validate() const {
  if (!(std::isfinite(hbar) && hbar > 0.0)) {
    throw ConfigurationError("physical scale: hbar must be finite and > 0");
  }
  if (!(std::isfinite(mass) && mass > 0.0)) {
    throw ConfigurationError("physical scale: mass must be finite and > 0");
  }
  const double d = diffusion();
  if (!(std::isfinite(d) && d > 0.0)) {
    throw ConfigurationError("physical scale: hbar/mass must be finite and > 0");
  }
}

std::string_view to_string(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::constant: return "constant";
    case FieldKind::ou_nelson: return "ou_nelson";
    case FieldKind::user: return "user";
  }
  return "user";
}

CoefficientField CoefficientField::constant(double drift, double volatility) {
  if (!std::isfinite(drift) || !std::isfinite(volatility)) {
    throw ConfigurationError("constant field: coefficients must be finite");
  }
  CoefficientField f;
  f.kind_ = FieldKind::constant;
  f.label_ = "constant";
  f.drift_constant_ = drift;
  f.volatility_constant_ = volatility;
  return f;
}

CoefficientField CoefficientField::ou_nelson(double omega, double volatility) {
  if (!(std::isfinite(omega) && omega > 0.0)) {
    throw ConfigurationError("ou_nelson field: omega must be finite and > 0");
  }
  if (!std::isfinite(volatility)) {
    throw ConfigurationError("ou_nelson field: volatility must be finite");
  }
  CoefficientField f;
  f.kind_ = FieldKind::ou_nelson;
  f.label_ = "ou_nelson";
  f.omega_ = omega;
  f.volatility_constant_ = volatility;
  return f;
}

CoefficientField CoefficientField::user(Function drift, Function volatility, std::string label) {
  if (!drift || !volatility) throw ConfigurationError("user field: both coefficients required");
  CoefficientField f;
  f.kind_ = FieldKind::user;
  f.label_ = std::move(label);
  f.drift_fn_ = std::move(drift);
  f.volatility_fn_ = std::move(volatility);
  return f;
}

CoefficientField CoefficientField::history_dependent(Function drift, HistoryFunction volatility,
                                                     std::string label) {
  if (!drift || !volatility) {
    throw ConfigurationError("history field: both coefficients required");
  }
  CoefficientField f;
  f.kind_ = FieldKind::user;
  f.label_ = std::move(label);
  f.drift_fn_ = std::move(drift);
  f.history_volatility_ = std::move(volatility);
  return f;
}

CoefficientField builtin_field(std::string_view name, const PhysicalScale& scale,
                               std::optional<double> omega) {
  scale.validate();
  const double sigma = std::sqrt(scale.diffusion());
  if (name == "free") return CoefficientField::constant(0.0, sigma);
  if (name == "ou_nelson") {
    if (!omega) throw ConfigurationError("ou_nelson field requires omega");
    if (!(std::isfinite(*omega) && *omega > 0.0)) {
      throw ConfigurationError("omega must be finite and > 0");
    }
    return CoefficientField::ou_nelson(*omega, sigma);
  }
  throw ConfigurationError("unknown builtin field '" + std::string(name) + "'");
}

LipschitzProbe probe_lipschitz(const CoefficientField& field, double t_lo, double t_hi,
                               double x_lo, double x_hi, int samples_per_axis) {
  LipschitzProbe probe;
  if (samples_per_axis < 2 || !(x_hi > x_lo)) return probe;
  const double h = (x_hi - x_lo) / (samples_per_axis - 1);
  for (int i = 0; i < samples_per_axis; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / (samples_per_axis - 1);
    for (int j = 0; j + 1 < samples_per_axis; ++j) {
      const double x = x_lo + h * j;
      const double db = std::abs(field.drift(t, x + h) - field.drift(t, x)) / h;
      const double ds = std::abs(field.volatility(t, x + h) - field.volatility(t, x)) / h;
      if (std::isfinite(db)) probe.drift_slope = std::max(probe.drift_slope, db);
      if (std::isfinite(ds)) probe.volatility_slope = std::max(probe.volatility_slope, ds);
    }
  }
  return probe;
}

}  // namespace zitterwalk
