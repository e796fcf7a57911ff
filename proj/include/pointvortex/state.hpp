#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "vec2.hpp"

namespace pv {

inline constexpr double kDefaultDistanceFloor = 1e-30;

/// Instantaneous configuration of N point vortices: positions, intensities and the kernel
/// exponent alpha. Construction validates the configuration; a state with two coincident
/// vortices has already collapsed and is rejected.
class VortexState {
 public:
  VortexState(std::vector<Vec2> positions, std::vector<double> intensities, double alpha)
      : positions_(std::move(positions)), intensities_(std::move(intensities)), alpha_(alpha) {
    validate();
  }

  std::size_t size() const { return positions_.size(); }
  std::span<const Vec2> positions() const { return positions_; }
  std::span<const double> intensities() const { return intensities_; }
  const Vec2& position(std::size_t i) const { return positions_.at(i); }
  double intensity(std::size_t i) const { return intensities_.at(i); }
  double alpha() const { return alpha_; }

  /// Same intensities and exponent, new positions.
  VortexState with_positions(std::vector<Vec2> positions) const {
    return VortexState(std::move(positions), intensities_, alpha_);
  }

  double total_intensity() const {
    double s = 0.0;
    for (double a : intensities_) s += a;
    return s;
  }

 private:
  void validate() const {
    if (positions_.empty()) throw PreconditionError("a vortex state needs at least one vortex");
    if (positions_.size() != intensities_.size()) {
      throw PreconditionError("positions and intensities differ in length (" +
                              std::to_string(positions_.size()) + " vs " +
                              std::to_string(intensities_.size()) + ")");
    }
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw DomainError("alpha must be finite and >= 0");
    for (std::size_t i = 0; i < intensities_.size(); ++i) {
      if (intensities_[i] == 0.0 || !std::isfinite(intensities_[i])) {
        throw PreconditionError("intensity " + std::to_string(i) + " must be finite and nonzero");
      }
      if (!isfinite(positions_[i])) throw PreconditionError("position " + std::to_string(i) + " is not finite");
    }
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      for (std::size_t j = i + 1; j < positions_.size(); ++j) {
        if (positions_[i] == positions_[j]) {
          throw SingularConfiguration("vortices " + std::to_string(i) + " and " + std::to_string(j) +
                                      " coincide");
        }
      }
    }
  }

  std::vector<Vec2> positions_;
  std::vector<double> intensities_;
  double alpha_;
};

inline double min_pair_distance(std::span<const Vec2> x) {
  double best = INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) best = std::min(best, distance(x[i], x[j]));
  return best;
}

}  // namespace pv
