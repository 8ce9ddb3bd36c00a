#pragma once

#include <cmath>

namespace zitterwalk {

/// Neumaier's improved Kahan summation. Bin accumulators use it so that the
/// result does not depend on the order paths are visited in, beyond ~1e-15 relative.
class NeumaierSum {
 public:
  NeumaierSum& operator+=(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      compensation_ += (sum_ - t) + v;
    } else {
      compensation_ += (v - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  NeumaierSum& operator+=(const NeumaierSum& other) noexcept {
    *this += other.sum_;
    compensation_ += other.compensation_;
    return *this;
  }

  [[nodiscard]] double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace zitterwalk
