#include "zitterwalk/error.hpp"

#include <sstream>

namespace zitterwalk {

std::string EvaluationSite::describe() const {
  std::ostringstream out;
  out << "t=" << t << ", x=" << x;
  if (step) out << ", step=" << *step;
  if (path_id) out << ", path_id=" << *path_id;
  return out.str();
}

NumericDomainError::NumericDomainError(const std::string& what, EvaluationSite site)
    : Error(what + " (" + site.describe() + ")"), reason_(what), site_(site) {}

DegenerateVolatilityError::DegenerateVolatilityError(double volatility, EvaluationSite site)
    : NumericDomainError("degenerate volatility " + std::to_string(volatility) + " <= 0", site),
      volatility_(volatility) {}

}  // namespace zitterwalk
