#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "state.hpp"
#include "vec2.hpp"

namespace pv {

// Euler point vortices in the open unit disc. Points are identified with complex numbers.

inline constexpr double kInvTwoPi = 0.5 * std::numbers::inv_pi;
inline constexpr double kBoundaryWarningDistance = 1e-6;

namespace detail {
inline void require_interior(const Vec2& x, const char* what) {
  if (!isfinite(x) || !(norm2(x) < 1.0)) throw DomainError(std::string(what) + " must lie in the open unit disc");
}
}  // namespace detail

class DiscState : public VortexState {
 public:
  DiscState(std::vector<Vec2> positions, std::vector<double> intensities)
      : VortexState(std::move(positions), std::move(intensities), 1.0) {
    for (const auto& p : this->positions()) detail::require_interior(p, "vortex position");
  }
  explicit DiscState(const VortexState& s) : VortexState(s) {
    if (s.alpha() != 1.0) throw PreconditionError("disc dynamics is defined for alpha = 1");
    for (const auto& p : positions()) detail::require_interior(p, "vortex position");
  }
};

/// G(x, y) = (1/2pi) ln(|1 - x conj(y)| / |x - y|).
inline double green_disc(const Vec2& x, const Vec2& y) {
  detail::require_interior(x, "x");
  detail::require_interior(y, "y");
  const double d = distance(x, y);
  if (!(d > 0.0)) throw SingularConfiguration("Green function evaluated at coincident points");
  const std::complex<double> zx = to_complex(x), zy = to_complex(y);
  return kInvTwoPi * std::log(std::abs(1.0 - zx * std::conj(zy)) / d);
}

/// Robin function gamma(x, y) = (1/2pi) ln|1 - x conj(y)|.
inline double robin_disc(const Vec2& x, const Vec2& y) {
  detail::require_interior(x, "x");
  detail::require_interior(y, "y");
  return kInvTwoPi * std::log(std::abs(1.0 - to_complex(x) * std::conj(to_complex(y))));
}

/// gamma(x, x) = (1/2pi) ln(1 - |x|^2).
inline double robin_disc(const Vec2& x) {
  detail::require_interior(x, "x");
  return kInvTwoPi * std::log1p(-norm2(x));
}

/// Gradient of gamma in its first variable: -y / (2pi (1 - conj(x) y)).
inline Vec2 robin_gradient_disc(const Vec2& x, const Vec2& y) {
  detail::require_interior(x, "x");
  detail::require_interior(y, "y");
  const std::complex<double> zx = to_complex(x), zy = to_complex(y);
  return to_vec(-kInvTwoPi * zy / (1.0 - std::conj(zx) * zy));
}

/// First-variable gradient on the diagonal, -x / (2pi (1 - |x|^2)).
inline Vec2 robin_gradient_diagonal(const Vec2& x) {
  detail::require_interior(x, "x");
  return (-kInvTwoPi / (1.0 - norm2(x))) * x;
}

/// Half the gradient of x -> gamma(x, x); equals robin_gradient_diagonal by symmetry of gamma.
inline Vec2 robin_diagonal_half_gradient(const Vec2& x) {
  detail::require_interior(x, "x");
  return (0.5 * kInvTwoPi * -2.0 / (1.0 - norm2(x))) * x;
}

/// v_i = (1/2pi) sum_{j != i} a_j (x_i - x_j)^perp / |x_i - x_j|^2 - sum_j a_j (grad_x gamma(x_i, x_j))^perp.
inline void disc_velocity(std::span<const Vec2> x, std::span<const double> a, std::span<Vec2> out,
                          double floor = kDefaultDistanceFloor) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!isfinite(x[i]) || !(norm2(x[i]) < 1.0)) throw DomainError("vortex left the unit disc");
  }
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 v{};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        v -= a[i] * perp(robin_gradient_diagonal(x[i]));
        continue;
      }
      const Vec2 d = x[i] - x[j];
      const double r2 = norm2(d);
      if (!(r2 > floor * floor)) throw SingularConfiguration("vortices coincide");
      v += (kInvTwoPi * a[j] / r2) * perp(d);
      const std::complex<double> zi = to_complex(x[i]), zj = to_complex(x[j]);
      v -= a[j] * perp(to_vec(-kInvTwoPi * zj / (1.0 - std::conj(zi) * zj)));
    }
    out[i] = v;
  }
}

inline std::vector<Vec2> disc_velocity_field(const DiscState& state) {
  std::vector<Vec2> v(state.size());
  disc_velocity(state.positions(), state.intensities(), v);
  return v;
}

/// H = -sum_{i<j} a_i a_j G(x_i, x_j) - 1/2 sum_i a_i^2 gamma(x_i, x_i); a_i dx_i/dt = grad^perp_{x_i} H.
inline double disc_hamiltonian(std::span<const Vec2> x, std::span<const double> a) {
  double h = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    h -= 0.5 * a[i] * a[i] * robin_disc(x[i]);
    for (std::size_t j = i + 1; j < x.size(); ++j) h -= a[i] * a[j] * green_disc(x[i], x[j]);
  }
  return h;
}

inline double disc_hamiltonian(const DiscState& s) { return disc_hamiltonian(s.positions(), s.intensities()); }

inline InvariantScales disc_term_scales(std::span<const Vec2> x, std::span<const double> a) {
  InvariantScales s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.hamiltonian += 0.5 * a[i] * a[i] * std::abs(robin_disc(x[i]));
    s.vorticity_vector += std::abs(a[i]) * norm(x[i]);
    s.momentum += std::abs(a[i]) * norm2(x[i]);
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      s.hamiltonian += std::abs(a[i] * a[j] * green_disc(x[i], x[j]));
      s.pair_moment += 2.0 * std::abs(a[i] * a[j]) * norm2(x[i] - x[j]);
    }
  }
  return s;
}

struct DiscField {
  std::vector<double> intensities;
  double floor{kDefaultDistanceFloor};

  explicit DiscField(const VortexState& s) : intensities(s.intensities().begin(), s.intensities().end()) {}
  explicit DiscField(std::vector<double> a) : intensities(std::move(a)) {}

  void operator()(std::span<const Vec2> x, std::span<Vec2> v) const { disc_velocity(x, intensities, v, floor); }

  // H is the disc Hamiltonian; I = sum a_i |x_i|^2 is conserved by rotational symmetry.
  InvariantSample invariants(std::span<const Vec2> x) const {
    return {disc_hamiltonian(x, intensities), vorticity_vector(x, intensities), momentum(x, intensities),
            pair_moment(x, intensities), min_pair_distance(x)};
  }

  std::optional<std::string> diagnose(std::span<const Vec2> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (1.0 - norm(x[i]) < kBoundaryWarningDistance) {
        return "vortex " + std::to_string(i) + " within 1e-6 of the boundary";
      }
    }
    return std::nullopt;
  }
};

inline TrajectoryRecord integrate_disc(const DiscState& initial, double t0, double t1,
                                       const IntegratorOptions& opts = {}) {
  return integrate(initial, t0, t1, opts, DiscField(initial));
}

struct BoundaryHolderCheck {
  HolderFit fit;
  bool consistent{false};
  double closest_approach{0.0};
};

/// Hoelder fit of vortex `index` toward `candidate_limit`; requires some sample within
/// 10 collapse_radius of the candidate and reports whether beta is within `rel_tol` of 1/2.
inline BoundaryHolderCheck boundary_holder_check(const TrajectoryRecord& rec, double t_collapse, std::size_t index,
                                                 const Vec2& candidate_limit, double rel_tol = 0.02,
                                                 HolderFitOptions opts = {}) {
  if (rec.states.empty() || index >= rec.states.front().size()) throw PreconditionError("vortex index out of range");
  double closest = std::numeric_limits<double>::infinity();
  for (const auto& st : rec.states) closest = std::min(closest, distance(st.position(index), candidate_limit));
  if (!(closest <= 10.0 * rec.collapse_radius)) {
    throw PreconditionError("trajectory never approaches the candidate limit point");
  }
  if (!opts.known_exponent) opts.known_exponent = 0.5;
  BoundaryHolderCheck out;
  out.fit = holder_fit(rec, t_collapse, index, opts);
  out.closest_approach = closest;
  out.consistent = std::abs(out.fit.exponent - 0.5) <= rel_tol * 0.5;
  return out;
}

}  // namespace pv
