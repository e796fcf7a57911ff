#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "integrator.hpp"
#include "vec2.hpp"

namespace pv {

struct BallsCover {
  double delta{0.0};
  std::vector<std::size_t> representatives;  // sorted
  // Indices removed, in removal order; each removal inflates delta by 2/kappa.
  std::vector<std::size_t> removed;
  std::size_t iterations{0};
};

/// Iterative removal construction: start from every point with delta = eps; while two
/// representatives are closer than delta/kappa, drop one and multiply delta by 2/kappa.
/// The result satisfies eps <= delta < (kappa/2)^-N eps, every eps-ball around a point lies in the
/// union of delta-balls around the representatives, and representatives are >= delta/kappa apart.
/// Ties are broken deterministically: the higher index of the lexicographically smallest
/// violating pair is removed.
inline BallsCover balls_cover(std::span<const Vec2> points, double eps, double kappa) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("balls_cover requires eps > 0");
  if (!(kappa > 0.0 && kappa <= 0.5)) throw PreconditionError("balls_cover requires 0 < kappa <= 1/2");
  BallsCover out;
  out.delta = eps;
  std::vector<std::size_t> reps(points.size());
  for (std::size_t i = 0; i < reps.size(); ++i) reps[i] = i;

  while (true) {
    std::optional<std::size_t> victim;
    const double threshold = out.delta / kappa;
    for (std::size_t u = 0; u < reps.size() && !victim; ++u) {
      for (std::size_t v = u + 1; v < reps.size(); ++v) {
        if (distance(points[reps[u]], points[reps[v]]) < threshold) {
          victim = v;
          break;
        }
      }
    }
    if (!victim) break;
    out.removed.push_back(reps[*victim]);
    reps.erase(reps.begin() + static_cast<std::ptrdiff_t>(*victim));
    out.delta *= 2.0 / kappa;
    ++out.iterations;
  }
  out.representatives = std::move(reps);
  return out;
}

/// Partition with intra-cluster distances <= delta and inter-cluster distances >= delta/kappa.
struct ClusterPartition {
  std::vector<std::vector<std::size_t>> parts;  // each sorted; ordered by smallest member
  double delta{0.0};
  double kappa{0.0};
};

namespace detail {
inline void normalize_parts(std::vector<std::vector<std::size_t>>& parts) {
  for (auto& p : parts) std::sort(p.begin(), p.end());
  std::sort(parts.begin(), parts.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
}
}  // namespace detail

/// For 0 < kappa < 1 and d > 0: delta in [1/2 (kappa/8)^N d, d) and a partition certified by the
/// intra/inter bounds. Built from balls_cover with eps = 1/2 (kappa/8)^N d and
/// kappa' = (2/kappa + 2)^-1; delta = 2 delta' and the parts are the delta'-neighbourhoods of the
/// representatives.
inline ClusterPartition cluster_partition(std::span<const Vec2> points, double d, double kappa) {
  if (!(d > 0.0) || !std::isfinite(d)) throw PreconditionError("cluster_partition requires d > 0");
  if (!(kappa > 0.0 && kappa < 1.0)) throw PreconditionError("cluster_partition requires 0 < kappa < 1");
  if (points.empty()) return {{}, d * 0.5, kappa};
  const double n = static_cast<double>(points.size());
  const double eps = 0.5 * std::pow(kappa / 8.0, n) * d;
  const double kappa_inner = 1.0 / (2.0 / kappa + 2.0);
  const BallsCover cover = balls_cover(points, eps, kappa_inner);
  const double delta_inner = cover.delta;

  ClusterPartition out;
  out.delta = 2.0 * delta_inner;
  out.kappa = kappa;
  std::vector<bool> assigned(points.size(), false);
  for (std::size_t rep : cover.representatives) {
    std::vector<std::size_t> part;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (distance(points[rep], points[j]) <= delta_inner) {
        if (assigned[j]) throw Error("cluster_partition: point assigned twice (internal error)");
        assigned[j] = true;
        part.push_back(j);
      }
    }
    out.parts.push_back(std::move(part));
  }
  if (std::find(assigned.begin(), assigned.end(), false) != assigned.end()) {
    throw Error("cluster_partition: point left unassigned (internal error)");
  }
  detail::normalize_parts(out.parts);
  return out;
}

struct CollisionClusters {
  std::vector<std::vector<std::size_t>> parts;
  // Smallest distance between vortices of different clusters over the whole record.
  double separation_floor{0.0};
  double window{0.0};
};

/// Collision clusters of a collapsed record: i and j share a cluster when their distance falls to
/// <= 2 collapse_radius within the final `window` of time (transitively closed). The default window
/// is 1e-3 of the elapsed time to collapse.
inline CollisionClusters collision_clusters(const TrajectoryRecord& rec, std::optional<double> window = std::nullopt) {
  if (rec.termination != Termination::collapsed || !rec.collapse_time) {
    throw NoCollapse("collision_clusters needs a record terminated by collapse");
  }
  const double tc = *rec.collapse_time;
  const double w = window.value_or(1e-3 * (tc - rec.t_start()));
  if (!(w > 0.0)) throw PreconditionError("collision window must be positive");
  const std::size_t n = rec.states.front().size();
  const double threshold = 2.0 * rec.collapse_radius;

  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec.times[k] < tc - w) continue;
    const auto x = rec.states[k].positions();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (distance(x[i], x[j]) <= threshold) parent[find(i)] = find(j);
  }

  CollisionClusters out;
  out.window = w;
  std::vector<std::vector<std::size_t>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) by_root[find(i)].push_back(i);
  for (auto& p : by_root)
    if (!p.empty()) out.parts.push_back(std::move(p));
  detail::normalize_parts(out.parts);

  std::vector<std::size_t> label(n);
  for (std::size_t c = 0; c < out.parts.size(); ++c)
    for (std::size_t i : out.parts[c]) label[i] = c;
  out.separation_floor = std::numeric_limits<double>::infinity();
  for (const auto& st : rec.states) {
    const auto x = st.positions();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (label[i] != label[j]) out.separation_floor = std::min(out.separation_floor, distance(x[i], x[j]));
  }
  return out;
}

}  // namespace pv
