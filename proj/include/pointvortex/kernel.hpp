#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"

namespace pv {

/// Kernel profile K_alpha: the radial function with K_alpha'(r) = r^-alpha, normalized so that
/// K_alpha(1) = 0. This gives ln r for alpha = 1 and (r^(1-alpha) - 1) / (1 - alpha) otherwise.
class KernelProfile {
 public:
  explicit KernelProfile(double alpha) : alpha_(alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
      throw DomainError("kernel exponent alpha must be finite and >= 0, got " + std::to_string(alpha));
    }
  }

  double alpha() const { return alpha_; }

  double value(double r) const {
    check_radius(r);
    const double log_r = std::log(r);
    const double beta = 1.0 - alpha_;
    if (beta == 0.0) return log_r;
    // expm1 keeps the expression continuous (and accurate) as alpha -> 1.
    return std::expm1(beta * log_r) / beta;
  }

  double derivative(double r) const {
    check_radius(r);
    return std::pow(r, -alpha_);
  }

 private:
  static void check_radius(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw DomainError("kernel profile evaluated at non-positive radius " + std::to_string(r));
    }
  }

  double alpha_;
};

inline double kernel_value(double alpha, double r) { return KernelProfile(alpha).value(r); }

}  // namespace pv
