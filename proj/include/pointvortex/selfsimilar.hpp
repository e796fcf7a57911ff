#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "state.hpp"
#include "vec2.hpp"

namespace pv {

// Self-similar collapse of three vortices with intensities (a, 1, 1) placed on a right triangle
// with legs |A| = |x2 - x3| = 1 and |B| = |x3 - x1| = lambda. The shape is preserved exactly
// when g(lambda) = 0 and `a` solves the two side-ratio conditions; the triangle then shrinks as
// A(t) = (1 - C' t)^(1/(alpha+1)) and collapses at T = 1 / C'.

/// g(lambda) = (1+l^2)/s^(alpha+1) * (1 - s^(alpha+1))/l^2 - (1 - l^-(alpha+1)), s = sqrt(1+l^2).
/// Defined for 0 < lambda <= 1.
inline double g_eval(double lambda, double alpha) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("g is defined for lambda in (0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("g requires alpha > 0");
  const double p = alpha + 1.0;
  const double l2 = lambda * lambda;
  const double sp = std::pow(1.0 + l2, 0.5 * p);
  return (1.0 + l2) / sp * ((1.0 - sp) / l2) - (1.0 - std::pow(lambda, -p));
}

/// Bisection for the root of g on [1e-6, 1 - 1e-9], down to an interval of width 1e-14.
inline double solve_lambda(double alpha) {
  double lo = 1e-6;
  double hi = 1.0 - 1e-9;
  const double glo = g_eval(lo, alpha);
  const double ghi = g_eval(hi, alpha);
  if (!(glo > 0.0 && ghi < 0.0)) {
    throw BracketFailure("g does not change sign on [1e-6, 1-1e-9] for alpha = " + std::to_string(alpha));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g_eval(mid, alpha);
    if (gm == 0.0) return mid;
    if (gm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  if (std::abs(g_eval(root, alpha)) > 1e-12) {
    throw BracketFailure("bisection for g did not reach residual 1e-12 at alpha = " + std::to_string(alpha));
  }
  return root;
}

/// Both closed forms for the intensity a of the first vortex: from the |B|/|A| ratio condition
/// and from the |C|/|A| ratio condition.
struct IntensityForms {
  double from_first{0.0};
  double from_second{0.0};
};

inline IntensityForms intensity_forms(double lambda, double alpha) {
  const double p = alpha + 1.0;
  const double l2 = lambda * lambda;
  const double inv_lp = std::pow(lambda, -p);
  const double inv_sp = std::pow(1.0 + l2, -0.5 * p);
  const double gap = inv_lp - inv_sp;
  return {(inv_sp - 1.0) / (l2 * gap), (1.0 - inv_lp) / ((1.0 + l2) * gap)};
}

/// Residuals of the two side-ratio conditions for a given (lambda, a):
///   lambda^2 a (l^-p - s^-p) - (s^-p - 1)   and   a (1+l^2)(l^-p - s^-p) - (1 - l^-p).
inline std::array<double, 2> ratio_condition_residuals(double lambda, double a, double alpha) {
  const double p = alpha + 1.0;
  const double l2 = lambda * lambda;
  const double inv_lp = std::pow(lambda, -p);
  const double inv_sp = std::pow(1.0 + l2, -0.5 * p);
  return {l2 * a * (inv_lp - inv_sp) - (inv_sp - 1.0), a * (1.0 + l2) * (inv_lp - inv_sp) - (1.0 - inv_lp)};
}

/// Intensity a from the first closed form, cross-checked against the second (relative 1e-8).
inline double intensity_from_lambda(double lambda, double alpha) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("lambda must lie in (0, 1)");
  const auto forms = intensity_forms(lambda, alpha);
  if (!(std::abs(forms.from_first - forms.from_second) <= 1e-8 * std::abs(forms.from_first))) {
    throw Inconsistency("intensity closed forms disagree (" + std::to_string(forms.from_first) + " vs " +
                        std::to_string(forms.from_second) + "): lambda is not a root of g");
  }
  if (!(forms.from_first < 0.0)) throw SignError("self-similar intensity must be negative");
  return forms.from_first;
}

enum class Orientation { positive, negative };

inline Orientation opposite(Orientation o) {
  return o == Orientation::positive ? Orientation::negative : Orientation::positive;
}

struct SelfSimilarResiduals {
  double g{0.0};
  double ratio_first{0.0};
  double ratio_second{0.0};
  double pair_moment{0.0};         // L(0)
  double inverse_power{0.0};       // sum a_i a_j l^-alpha
  double kernel_power{0.0};        // sum a_i a_j l^(1-alpha)
  double right_angle{0.0};         // A(0) . B(0)
  double rotation_spread{0.0};     // max_j |Im(v_j/x_j) - D|
  double contraction_spread{0.0};  // max_j |Re(v_j/x_j) + 1/((alpha+1) T)|
};

struct SelfSimilarSolution {
  double alpha{1.0};
  double lambda{0.0};
  double intensity_a{0.0};
  Orientation orientation{Orientation::negative};
  VortexState initial_state;  // positions relative to the center of vorticity
  Vec2 center_offset{};       // center of vorticity of the un-shifted triangle
  double C{0.0};              // dA/dt = -C / A^alpha
  double C_prime{0.0};        // A(t)^(alpha+1) = 1 - C' t, C' = (alpha+1) C
  double D{0.0};              // angular rate at t = 0; theta(t) = -D T ln((T-t)/T)
  double T{0.0};
  SelfSimilarResiduals residuals;
};

/// Right triangle x3 = 0, x2 = (1, 0), x1 = (0, +-lambda), shifted so that the center of
/// vorticity sits at the origin. C' and D are read off the exact velocity field at t = 0.
inline SelfSimilarSolution build_configuration(double alpha, Orientation orientation) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("build_configuration requires alpha > 0");
  const double lambda = solve_lambda(alpha);
  const double a = intensity_from_lambda(lambda, alpha);
  const double sign = orientation == Orientation::positive ? 1.0 : -1.0;

  std::vector<Vec2> x{{0.0, sign * lambda}, {1.0, 0.0}, {0.0, 0.0}};
  const std::vector<double> intensities{a, 1.0, 1.0};
  const Vec2 center = vorticity_vector(x, intensities) / (a + 2.0);
  for (auto& p : x) p -= center;

  VortexState state(x, intensities, alpha);
  const auto v = velocity_field(state);
  const Vec2 side_a = x[1] - x[2];
  const double dA2 = 2.0 * dot(side_a, v[1] - v[2]);
  const double c_prime = -0.5 * (alpha + 1.0) * dA2 * std::pow(norm2(side_a), 0.5 * (alpha - 1.0));
  if (!(c_prime > 0.0)) {
    throw ExpandingSolution("orientation yields an expanding self-similar solution; request the opposite sign");
  }

  SelfSimilarSolution sol{alpha, lambda, a, orientation, state, center, c_prime / (alpha + 1.0), c_prime, 0.0,
                          1.0 / c_prime, {}};

  // Rotation rate: v_j / x_j = f'(0) + i theta'(0) for every j.
  std::array<std::complex<double>, 3> rates{};
  for (std::size_t j = 0; j < 3; ++j) rates[j] = to_complex(v[j]) / to_complex(x[j]);
  sol.D = (rates[0].imag() + rates[1].imag() + rates[2].imag()) / 3.0;
  const double contraction = -1.0 / ((alpha + 1.0) * sol.T);
  for (const auto& r : rates) {
    sol.residuals.rotation_spread = std::max(sol.residuals.rotation_spread, std::abs(r.imag() - sol.D));
    sol.residuals.contraction_spread = std::max(sol.residuals.contraction_spread, std::abs(r.real() - contraction));
  }

  const auto ratio = ratio_condition_residuals(lambda, a, alpha);
  sol.residuals.g = g_eval(lambda, alpha);
  sol.residuals.ratio_first = ratio[0];
  sol.residuals.ratio_second = ratio[1];
  sol.residuals.pair_moment = pair_moment(x, intensities);
  sol.residuals.inverse_power = inverse_power_functional(x, intensities, alpha);
  sol.residuals.kernel_power = kernel_power_functional(x, intensities, alpha);
  sol.residuals.right_angle = dot(side_a, x[2] - x[0]);
  return sol;
}

/// Tries `preferred` first and falls back to the opposite orientation if it expands.
inline SelfSimilarSolution build_collapsing_configuration(double alpha,
                                                          Orientation preferred = Orientation::negative) {
  try {
    return build_configuration(alpha, preferred);
  } catch (const ExpandingSolution&) {
    return build_configuration(alpha, opposite(preferred));
  }
}

/// Radial factor f(t) = ((T - t) / T)^(1/(alpha+1)).
inline double scale_factor(const SelfSimilarSolution& sol, double t) {
  return std::pow((sol.T - t) / sol.T, 1.0 / (sol.alpha + 1.0));
}

/// x_j(t) = x_j(0) f(t) e^{i theta(t)} about the center of vorticity, for 0 <= t < T.
inline std::vector<Vec2> analytic_trajectory(const SelfSimilarSolution& sol, double t) {
  if (!(t >= 0.0 && t < sol.T)) throw DomainError("analytic trajectory is defined on [0, T)");
  const double ratio = (sol.T - t) / sol.T;
  const double f = std::pow(ratio, 1.0 / (sol.alpha + 1.0));
  const double theta = -sol.D * sol.T * std::log(ratio);
  std::vector<Vec2> out;
  out.reserve(3);
  for (const auto& p : sol.initial_state.positions()) out.push_back(f * rotate(p, theta));
  return out;
}

/// Signed area of the oriented triangle (x1, x2, x3).
inline double signed_area(const Vec2& x1, const Vec2& x2, const Vec2& x3) { return 0.5 * cross(x2 - x1, x3 - x1); }

}  // namespace pv
