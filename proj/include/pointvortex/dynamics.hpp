#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernel.hpp"
#include "state.hpp"
#include "vec2.hpp"

namespace pv {

/// Planar alpha-model vector field,
///   v_i = sum_{j != i} a_j (x_i - x_j)^perp / |x_i - x_j|^(alpha + 1),
/// written into `out`. Throws SingularConfiguration if a pair distance drops below `floor`.
inline void planar_velocity(std::span<const Vec2> x, std::span<const double> a, double alpha,
                            std::span<Vec2> out, double floor = kDefaultDistanceFloor) {
  const std::size_t n = x.size();
  for (auto& v : out) v = Vec2{};
  const double p = alpha + 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2 d = x[i] - x[j];
      const double r = norm(d);
      if (!(r >= floor)) {
        throw SingularConfiguration("vortices " + std::to_string(i) + " and " + std::to_string(j) +
                                    " closer than the distance floor");
      }
      const double w = (p == 2.0) ? 1.0 / (r * r) : std::pow(r, -p);
      const Vec2 q = perp(d) * w;
      out[i] += a[j] * q;
      out[j] -= a[i] * q;
    }
  }
}

inline std::vector<Vec2> velocity_field(const VortexState& state, double floor = kDefaultDistanceFloor) {
  std::vector<Vec2> v(state.size());
  planar_velocity(state.positions(), state.intensities(), state.alpha(), v, floor);
  return v;
}

/// H = 1/2 sum_{i != j} a_i a_j K_alpha(|x_i - x_j|).
inline double hamiltonian(std::span<const Vec2> x, std::span<const double> a, double alpha,
                          double floor = kDefaultDistanceFloor) {
  const KernelProfile kernel(alpha);
  double h = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double r = distance(x[i], x[j]);
      if (!(r >= floor)) throw SingularConfiguration("pair distance below the floor in hamiltonian");
      h += a[i] * a[j] * kernel.value(r);
    }
  }
  return h;
}

inline double hamiltonian(const VortexState& s) { return hamiltonian(s.positions(), s.intensities(), s.alpha()); }

inline Vec2 vorticity_vector(std::span<const Vec2> x, std::span<const double> a) {
  Vec2 m{};
  for (std::size_t i = 0; i < x.size(); ++i) m += a[i] * x[i];
  return m;
}

inline double momentum(std::span<const Vec2> x, std::span<const double> a) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += a[i] * norm2(x[i]);
  return s;
}

/// L = sum_{i != j} a_i a_j |x_i - x_j|^2 (ordered pairs).
inline double pair_moment(std::span<const Vec2> x, std::span<const double> a) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) s += a[i] * a[j] * norm2(x[i] - x[j]);
  return 2.0 * s;
}

inline Vec2 vorticity_vector(const VortexState& s) { return vorticity_vector(s.positions(), s.intensities()); }
inline double momentum(const VortexState& s) { return momentum(s.positions(), s.intensities()); }
inline double pair_moment(const VortexState& s) { return pair_moment(s.positions(), s.intensities()); }

/// sum_{i != j} a_i a_j l_ij^-alpha. The appendix-style Hamiltonian condition for self-similar collapse.
inline double inverse_power_functional(std::span<const Vec2> x, std::span<const double> a, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) s += a[i] * a[j] * std::pow(distance(x[i], x[j]), -alpha);
  return 2.0 * s;
}

/// sum_{i != j} a_i a_j l_ij^(1-alpha): the coefficient by which H changes under a uniform
/// rescaling of the configuration (at alpha = 1 this is sum_{i != j} a_i a_j, the ln-scale coefficient).
inline double kernel_power_functional(std::span<const Vec2> x, std::span<const double> a, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) s += a[i] * a[j] * std::pow(distance(x[i], x[j]), 1.0 - alpha);
  return 2.0 * s;
}

struct InvariantSample {
  double hamiltonian{0.0};
  Vec2 vorticity_vector{};
  double momentum{0.0};
  double pair_moment{0.0};
  double min_pair_distance{0.0};
};

/// Magnitude scale of the terms entering L = 2 (sum a) I - 2 |M|^2; the identity residual is
/// compared against a multiple of machine epsilon times this scale.
inline double pair_moment_identity_scale(std::span<const Vec2> x, std::span<const double> a) {
  double abs_sum = 0.0;
  double abs_first = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    abs_sum += std::abs(a[i]);
    abs_first += std::abs(a[i]) * norm(x[i]);
  }
  double abs_i = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) abs_i += std::abs(a[i]) * norm2(x[i]);
  return 2.0 * abs_sum * abs_i + 2.0 * abs_first * abs_first;
}

inline double pair_moment_identity_residual(std::span<const Vec2> x, std::span<const double> a) {
  double total = 0.0;
  for (double ai : a) total += ai;
  const Vec2 m = vorticity_vector(x, a);
  return pair_moment(x, a) - (2.0 * total * momentum(x, a) - 2.0 * norm2(m));
}

inline InvariantSample planar_invariants(std::span<const Vec2> x, std::span<const double> a, double alpha) {
  return {hamiltonian(x, a, alpha), vorticity_vector(x, a), momentum(x, a), pair_moment(x, a), min_pair_distance(x)};
}

inline InvariantSample sample_invariants(const VortexState& s) {
  return planar_invariants(s.positions(), s.intensities(), s.alpha());
}

/// Vector-field selector for the planar alpha-model, usable with `integrate`.
struct PlanarField {
  std::vector<double> intensities;
  double alpha{1.0};
  double floor{kDefaultDistanceFloor};

  explicit PlanarField(const VortexState& s) : intensities(s.intensities().begin(), s.intensities().end()), alpha(s.alpha()) {}
  PlanarField(std::vector<double> a, double alpha_) : intensities(std::move(a)), alpha(alpha_) {}

  void operator()(std::span<const Vec2> x, std::span<Vec2> v) const { planar_velocity(x, intensities, alpha, v, floor); }
  InvariantSample invariants(std::span<const Vec2> x) const { return planar_invariants(x, intensities, alpha); }
};

/// Sums of absolute values of the terms of H, M, I and L; the natural scale for relative drifts.
struct InvariantScales {
  double hamiltonian{0.0};
  double vorticity_vector{0.0};
  double momentum{0.0};
  double pair_moment{0.0};
};

inline InvariantScales planar_term_scales(std::span<const Vec2> x, std::span<const double> a, double alpha) {
  const KernelProfile kernel(alpha);
  InvariantScales s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.vorticity_vector += std::abs(a[i]) * norm(x[i]);
    s.momentum += std::abs(a[i]) * norm2(x[i]);
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double r = distance(x[i], x[j]);
      s.hamiltonian += std::abs(a[i] * a[j] * kernel.value(r));
      s.pair_moment += 2.0 * std::abs(a[i] * a[j]) * r * r;
    }
  }
  return s;
}

}  // namespace pv
