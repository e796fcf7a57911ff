#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "state.hpp"
#include "vec2.hpp"

namespace pv {

namespace detail {

inline std::vector<bool> subset_mask(std::size_t n, std::span<const std::size_t> subset) {
  if (subset.empty()) throw PreconditionError("cluster subset must be nonempty");
  std::vector<bool> mask(n, false);
  for (std::size_t i : subset) {
    if (i >= n) throw PreconditionError("cluster index " + std::to_string(i) + " out of range");
    if (mask[i]) throw PreconditionError("cluster index " + std::to_string(i) + " repeated");
    mask[i] = true;
  }
  return mask;
}

inline double abs_sum(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double checked_cluster_sum(std::span<const double> a, std::span<const std::size_t> subset) {
  double s = 0.0;
  for (std::size_t i : subset) s += a[i];
  if (std::abs(s) <= 1e-14 * abs_sum(a)) throw NeutralCluster("cluster has zero total intensity");
  return s;
}

}  // namespace detail

/// Center of vorticity of the cluster `subset`: B_P = (sum_P a_i)^-1 sum_P a_i x_i.
inline Vec2 cluster_barycenter(std::span<const Vec2> x, std::span<const double> a,
                               std::span<const std::size_t> subset) {
  detail::subset_mask(x.size(), subset);
  const double s = detail::checked_cluster_sum(a, subset);
  Vec2 b{};
  for (std::size_t i : subset) b += a[i] * x[i];
  return b / s;
}

inline Vec2 cluster_barycenter(const VortexState& st, std::span<const std::size_t> subset) {
  return cluster_barycenter(st.positions(), st.intensities(), subset);
}

/// Exact dB_P/dt under the planar alpha-field. Interior pairs cancel, so only cross terms remain.
inline Vec2 barycenter_velocity(const VortexState& st, std::span<const std::size_t> subset) {
  const auto x = st.positions();
  const auto a = st.intensities();
  detail::subset_mask(x.size(), subset);
  const double s = detail::checked_cluster_sum(a, subset);
  const auto v = velocity_field(st);
  Vec2 db{};
  for (std::size_t i : subset) db += a[i] * v[i];
  return db / s;
}

/// Cross-term constant C0 = a * max_j |a_j| / |sum_P a_k|.
inline double barycenter_cross_constant(std::span<const double> a, std::span<const std::size_t> subset) {
  const double s = detail::checked_cluster_sum(a, subset);
  double amax = 0.0;
  for (double v : a) amax = std::max(amax, std::abs(v));
  return detail::abs_sum(a) * amax / std::abs(s);
}

/// Upper bound sum_{i in P} sum_{j not in P} C0 / |x_i - x_j|^alpha on |dB_P/dt|.
inline double barycenter_speed_bound(const VortexState& st, std::span<const std::size_t> subset,
                                     double floor = kDefaultDistanceFloor) {
  const auto x = st.positions();
  const auto a = st.intensities();
  const auto mask = detail::subset_mask(x.size(), subset);
  const double c0 = barycenter_cross_constant(a, subset);
  double bound = 0.0;
  for (std::size_t i : subset) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (mask[j]) continue;
      const double r = distance(x[i], x[j]);
      if (!(r >= floor)) throw SingularConfiguration("pair distance below the floor in barycenter_speed_bound");
      bound += c0 * std::pow(r, -st.alpha());
    }
  }
  return bound;
}

}  // namespace pv
