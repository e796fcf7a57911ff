#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "barycenter.hpp"
#include "clustering.hpp"
#include "degeneracy.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "vec2.hpp"

namespace pv {

struct HolderFitOptions {
  // Fit window on (t_c - t) / (t_c - t0).
  double window_lo{1e-6};
  double window_hi{1e-1};
  std::size_t min_samples{20};
  // Exponent used as the Richardson order of the limit-point extrapolation; order 1 if absent.
  std::optional<double> known_exponent;
};

struct HolderFit {
  std::optional<std::size_t> vortex_index;
  std::optional<std::pair<std::size_t, std::size_t>> pair;
  std::optional<Vec2> limit_point;
  double exponent{0.0};
  double prefactor{0.0};     // C in |x - x*| ~ C (t_c - t)^beta
  double fit_residual{0.0};  // RMS of log deviations
  double t_min{0.0};
  double t_max{0.0};
  std::size_t sample_count{0};
  double window_lo{0.0};
  double window_hi{0.0};
};

struct LogLogFit {
  double slope{0.0};
  double intercept{0.0};
  double rms{0.0};
};

/// Weighted least squares of log v against log s. Each sample is weighted by the length of
/// log s it represents, so clustered samples do not dominate the fit.
inline LogLogFit fit_log_log(std::span<const double> s, std::span<const double> v) {
  if (s.size() != v.size() || s.size() < 2) throw InsufficientSamples("log-log fit needs at least two samples");
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return s[i] < s[j]; });
  std::vector<double> lx(n), ly(n), w(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(s[order[k]] > 0.0) || !(v[order[k]] > 0.0)) throw DomainError("log-log fit needs positive data");
    lx[k] = std::log(s[order[k]]);
    ly[k] = std::log(v[order[k]]);
  }
  double wsum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double left = k > 0 ? lx[k] - lx[k - 1] : 0.0;
    const double right = k + 1 < n ? lx[k + 1] - lx[k] : 0.0;
    w[k] = 0.5 * (left + right);
    wsum += w[k];
  }
  if (!(wsum > 0.0)) std::fill(w.begin(), w.end(), 1.0);

  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sw += w[k];
    sx += w[k] * lx[k];
    sy += w[k] * ly[k];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += w[k] * (lx[k] - mx) * (lx[k] - mx);
    sxy += w[k] * (lx[k] - mx) * (ly[k] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientSamples("log-log fit needs distinct abscissae");
  LogLogFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = ly[k] - (out.intercept + out.slope * lx[k]);
    acc += d * d;
  }
  out.rms = std::sqrt(acc / static_cast<double>(n));
  return out;
}

/// Richardson extrapolation of x(t) -> x* assuming x(t) = x* + c (t_c - t)^p, using the last sample
/// before t_c and the sample closest (in log) to ten times its distance from t_c.
inline Vec2 extrapolate_limit_point(std::span<const double> times, std::span<const Vec2> x, double t_collapse,
                                    double order) {
  if (times.size() != x.size() || times.empty()) throw InsufficientSamples("no samples to extrapolate");
  std::optional<std::size_t> last;
  for (std::size_t k = times.size(); k-- > 0;) {
    if (t_collapse - times[k] > 0.0) {
      last = k;
      break;
    }
  }
  if (!last) return x.back();
  const double s2 = t_collapse - times[*last];
  std::optional<std::size_t> first;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < *last; ++k) {
    const double s = t_collapse - times[k];
    const double d = std::abs(std::log(s / (10.0 * s2)));
    if (d < best) {
      best = d;
      first = k;
    }
  }
  if (!first) return x[*last];
  const double s1 = t_collapse - times[*first];
  const double w1 = std::pow(s1, order), w2 = std::pow(s2, order);
  if (!(w1 > w2)) return x[*last];
  return (w1 * x[*last] - w2 * x[*first]) / (w1 - w2);
}

namespace detail {

inline void check_window(const HolderFitOptions& opts) {
  if (!(opts.window_lo > 0.0 && opts.window_lo < opts.window_hi && opts.window_hi <= 1.0)) {
    throw PreconditionError("Hoelder fit window must satisfy 0 < lo < hi <= 1");
  }
}

// Fits values[k] ~ C (t_c - t_k)^beta over the window; fills the fit fields of `out`.
inline void fit_window(std::span<const double> times, std::span<const double> values, double t0, double t_collapse,
                       const HolderFitOptions& opts, HolderFit& out) {
  const double span = t_collapse - t0;
  if (!(span > 0.0)) throw PreconditionError("collapse time must follow the start of the record");
  std::vector<double> s, v;
  double t_min = std::numeric_limits<double>::infinity(), t_max = -t_min;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double sk = t_collapse - times[k];
    const double rel = sk / span;
    if (!(rel >= opts.window_lo && rel <= opts.window_hi)) continue;
    if (!(values[k] > 0.0)) continue;
    s.push_back(sk);
    v.push_back(values[k]);
    t_min = std::min(t_min, times[k]);
    t_max = std::max(t_max, times[k]);
  }
  if (s.size() < opts.min_samples) {
    throw InsufficientSamples("only " + std::to_string(s.size()) + " samples in the fit window (need " +
                              std::to_string(opts.min_samples) + ")");
  }
  const LogLogFit fit = fit_log_log(s, v);
  out.exponent = fit.slope;
  out.prefactor = std::exp(fit.intercept);
  out.fit_residual = fit.rms;
  out.t_min = t_min;
  out.t_max = t_max;
  out.sample_count = s.size();
  out.window_lo = opts.window_lo;
  out.window_hi = opts.window_hi;
  if (!std::isfinite(out.exponent)) throw InsufficientSamples("non-finite Hoelder exponent");
}

inline void require_collapsed(const TrajectoryRecord& rec) {
  if (rec.termination != Termination::collapsed) {
    throw NoCollapse(std::string("record terminated with ") + to_string(rec.termination) + ", not a collapse");
  }
}

}  // namespace detail

/// Hoelder fit of raw samples x(t_k) of one trajectory: extrapolates x* and fits
/// |x(t) - x*| ~ C (t_c - t)^beta.
inline HolderFit holder_fit_samples(std::span<const double> times, std::span<const Vec2> x, double t_collapse,
                                    const HolderFitOptions& opts = {}) {
  detail::check_window(opts);
  if (times.size() != x.size() || times.empty()) throw InsufficientSamples("no samples");
  HolderFit out;
  const Vec2 limit = extrapolate_limit_point(times, x, t_collapse, opts.known_exponent.value_or(1.0));
  out.limit_point = limit;
  std::vector<double> dist(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) dist[k] = distance(x[k], limit);
  detail::fit_window(times, dist, times.front(), t_collapse, opts, out);
  return out;
}

/// Hoelder fit of raw distance samples d(t_k) ~ C (t_c - t)^beta (no limit point).
inline HolderFit relative_holder_fit_samples(std::span<const double> times, std::span<const double> d,
                                             double t_collapse, const HolderFitOptions& opts = {}) {
  detail::check_window(opts);
  if (times.size() != d.size() || times.empty()) throw InsufficientSamples("no samples");
  HolderFit out;
  detail::fit_window(times, d, times.front(), t_collapse, opts, out);
  return out;
}

inline HolderFit holder_fit(const TrajectoryRecord& rec, double t_collapse, std::size_t index,
                            const HolderFitOptions& opts = {}) {
  detail::require_collapsed(rec);
  if (rec.states.empty() || index >= rec.states.front().size()) throw PreconditionError("vortex index out of range");
  std::vector<Vec2> x;
  x.reserve(rec.size());
  for (const auto& st : rec.states) x.push_back(st.position(index));
  HolderFit out = holder_fit_samples(rec.times, x, t_collapse, opts);
  out.vortex_index = index;
  return out;
}

/// Fit of |x_i - x_j| ~ C (t_c - t)^beta. The pair must belong to one collision cluster.
inline HolderFit relative_holder_fit(const TrajectoryRecord& rec, double t_collapse, std::size_t i, std::size_t j,
                                     const HolderFitOptions& opts = {}) {
  detail::require_collapsed(rec);
  const std::size_t n = rec.states.front().size();
  if (i >= n || j >= n || i == j) throw PreconditionError("relative fit needs two distinct valid indices");
  const CollisionClusters clusters = collision_clusters(rec);
  const bool together = std::any_of(clusters.parts.begin(), clusters.parts.end(), [&](const auto& p) {
    return std::find(p.begin(), p.end(), i) != p.end() && std::find(p.begin(), p.end(), j) != p.end();
  });
  if (!together) {
    throw NoCollapse("vortices " + std::to_string(i) + " and " + std::to_string(j) + " do not collapse together");
  }
  std::vector<double> d;
  d.reserve(rec.size());
  for (const auto& st : rec.states) d.push_back(distance(st.position(i), st.position(j)));
  HolderFit out = relative_holder_fit_samples(rec.times, d, t_collapse, opts);
  out.pair = std::make_pair(i, j);
  return out;
}

struct PreventCollapseBound {
  double kappa{0.0};
  double r{0.0};
  double s{0.0};
  double log_s{0.0};
  double C_kappa{0.0};  // may underflow to 0; log_C_kappa is always finite
  double log_C_kappa{0.0};
  double C0{0.0};
  double C1{0.0};
  double alpha{0.0};
  double A0{0.0};
  double a{0.0};
  std::size_t N{0};

  // Largest T - t for which the implication is asserted at scale eta.
  double horizon(double eta) const { return std::exp(log_C_kappa + (alpha + 1.0) * std::log(eta)); }
};

/// Uniform constant C0 = a max|a_i| / A0 valid for every strict subcluster in the barycenter speed
/// bound of the alpha-model.
inline double uniform_cross_constant(std::span<const double> intensities) {
  const auto p = degeneracy_params(intensities);
  if (!(p.A0 > 0.0)) throw DegenerateIntensities("a strict subset of intensities sums to zero");
  double amax = 0.0;
  for (double v : intensities) amax = std::max(amax, std::abs(v));
  return p.a_abs_sum * amax / p.A0;
}

/// kappa = A0/(17a), r = min{1/8, A0/(8 a kappa) - 2}, s = r (kappa/8)^N and
/// C_kappa = 1/2 min{ a kappa^-alpha / (2^alpha A0 C0) s^((N-2)(alpha+1)), a / (A0 C1) s^(N-2) },
/// evaluated in logarithms.
inline PreventCollapseBound prevent_collapse_constant(std::span<const double> intensities, double alpha, double C0,
                                                      double C1, std::size_t N) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be >= 0");
  if (!(C0 >= 0.0) || !(C1 >= 0.0)) throw PreconditionError("C0 and C1 must be nonnegative");
  if (!(std::max(C0, C1) > 0.0)) throw PreconditionError("C0 = C1 = 0: the points are motionless");
  if (N < 2) throw PreconditionError("N must be at least 2");
  const auto p = degeneracy_params(intensities);
  if (!(p.A0 > 1e-14 * p.a_abs_sum)) throw DegenerateIntensities("a strict subset of intensities sums to zero");

  PreventCollapseBound b;
  b.alpha = alpha;
  b.C0 = C0;
  b.C1 = C1;
  b.N = N;
  b.A0 = p.A0;
  b.a = p.a_abs_sum;
  b.kappa = b.A0 / (17.0 * b.a);
  b.r = std::min(1.0 / 8.0, b.A0 / (8.0 * b.a * b.kappa) - 2.0);
  if (!(b.r > 0.0)) throw PreconditionError("r must be positive");
  const double nd = static_cast<double>(N);
  b.log_s = std::log(b.r) + nd * std::log(b.kappa / 8.0);
  b.s = std::exp(b.log_s);

  const double inf = std::numeric_limits<double>::infinity();
  const double log_first = C0 > 0.0 ? std::log(b.a) - alpha * std::log(b.kappa) - alpha * std::log(2.0) -
                                          std::log(b.A0) - std::log(C0) + (nd - 2.0) * (alpha + 1.0) * b.log_s
                                    : inf;
  const double log_second = C1 > 0.0 ? std::log(b.a) - std::log(b.A0) - std::log(C1) + (nd - 2.0) * b.log_s : inf;
  b.log_C_kappa = std::log(0.5) + std::min(log_first, log_second);
  b.C_kappa = std::exp(b.log_C_kappa);
  return b;
}

struct PreventCollapseCounterexample {
  std::size_t i{0};
  std::size_t j{0};
  double t{0.0};
  double tau{0.0};
  double distance_at_t{0.0};
  double distance_at_tau{0.0};
};

struct PreventCollapseVerdict {
  bool pass{true};
  std::size_t premises_checked{0};  // (sample, pair) combinations meeting both premises
  std::size_t comparisons{0};
  double horizon{0.0};
  double T{0.0};
  std::optional<PreventCollapseCounterexample> counterexample;
};

namespace detail {

inline PreventCollapseVerdict check_implication(std::span<const double> times,
                                                std::span<const std::vector<Vec2>> positions, double T,
                                                double horizon, double eta) {
  PreventCollapseVerdict out;
  out.T = T;
  out.horizon = horizon;
  const std::size_t m = times.size();
  if (m == 0) return out;
  const std::size_t n = positions.front().size();
  for (std::size_t k = 0; k < m; ++k) {
    if (!(T - times[k] <= horizon)) continue;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d0 = distance(positions[k][i], positions[k][j]);
        if (!(d0 >= eta)) continue;
        ++out.premises_checked;
        for (std::size_t q = k; q < m; ++q) {
          if (times[q] >= T && q != k) break;
          ++out.comparisons;
          const double dq = distance(positions[q][i], positions[q][j]);
          if (dq < 0.5 * eta) {
            out.pass = false;
            out.counterexample = PreventCollapseCounterexample{i, j, times[k], times[q], d0, dq};
            return out;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Checks: for every sample t with T - t <= C_kappa eta^(alpha+1) and every pair with
/// |x_i(t) - x_j(t)| >= eta, all later samples keep |x_i - x_j| >= eta/2. T is the collapse time of
/// a collapsed record and the final time otherwise.
inline PreventCollapseVerdict check_prevent_collapse_implication(const TrajectoryRecord& rec,
                                                                 const PreventCollapseBound& bound, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw PreconditionError("eta must lie in (0, 1]");
  if (rec.times.empty()) return {};
  const double T = rec.collapse_time.value_or(rec.t_end());
  std::vector<std::vector<Vec2>> pos;
  pos.reserve(rec.size());
  for (const auto& st : rec.states) pos.emplace_back(st.positions().begin(), st.positions().end());
  return detail::check_implication(rec.times, pos, T, bound.horizon(eta), eta);
}

/// Same check on raw samples with an explicit horizon (used to exercise the harness).
inline PreventCollapseVerdict check_prevent_collapse_samples(std::span<const double> times,
                                                             std::span<const std::vector<Vec2>> positions, double T,
                                                             double horizon, double eta) {
  if (times.size() != positions.size()) throw PreconditionError("times and positions differ in length");
  return detail::check_implication(times, positions, T, horizon, eta);
}

struct QuasiPreservationReport {
  double max_ratio{0.0};
  std::size_t samples_checked{0};
  std::optional<double> worst_time;
};

/// Max over interior samples of |dB_P/dt| (three-point finite difference on the nonuniform grid)
/// divided by barycenter_speed_bound. The full index set reports 0.
inline QuasiPreservationReport quasi_preservation_check(const TrajectoryRecord& rec,
                                                        std::span<const std::size_t> subset) {
  QuasiPreservationReport out;
  if (rec.size() == 0) return out;
  const auto a = rec.states.front().intensities();
  detail::subset_mask(a.size(), subset);
  detail::checked_cluster_sum(a, subset);
  std::vector<bool> seen(a.size(), false);
  std::size_t distinct = 0;
  for (std::size_t i : subset)
    if (!seen[i]) {
      seen[i] = true;
      ++distinct;
    }
  if (distinct == a.size()) return out;

  std::vector<Vec2> b(rec.size());
  for (std::size_t k = 0; k < rec.size(); ++k) b[k] = cluster_barycenter(rec.states[k], subset);
  for (std::size_t k = 1; k + 1 < rec.size(); ++k) {
    const double h0 = rec.times[k] - rec.times[k - 1];
    const double h1 = rec.times[k + 1] - rec.times[k];
    if (!(h0 > 0.0 && h1 > 0.0)) continue;
    const Vec2 d = (-h1 / (h0 * (h0 + h1))) * b[k - 1] + ((h1 - h0) / (h0 * h1)) * b[k] +
                   (h0 / (h1 * (h0 + h1))) * b[k + 1];
    const double bound = barycenter_speed_bound(rec.states[k], subset);
    ++out.samples_checked;
    const double ratio = bound > 0.0 ? norm(d) / bound : 0.0;
    if (ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.worst_time = rec.times[k];
    }
  }
  return out;
}

struct InvariantDrift {
  // max_k |Q(t_k) - Q(t_0)|
  double hamiltonian{0.0};
  double vorticity_vector{0.0};
  double momentum{0.0};
  double pair_moment{0.0};
  // The same divided by max(|Q(t_0)|, term scale of Q at t_0).
  double hamiltonian_rel{0.0};
  double vorticity_vector_rel{0.0};
  double momentum_rel{0.0};
  double pair_moment_rel{0.0};
  // max_k |L - (2 (sum a) I - 2 |M|^2)| / pair_moment_identity_scale.
  double identity_residual_rel{0.0};
};

inline InvariantDrift invariant_drift(const TrajectoryRecord& rec, const InvariantScales& scales) {
  InvariantDrift d;
  if (rec.size() == 0) return d;
  const InvariantSample& q0 = rec.invariants.front();
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const InvariantSample& q = rec.invariants[k];
    d.hamiltonian = std::max(d.hamiltonian, std::abs(q.hamiltonian - q0.hamiltonian));
    d.vorticity_vector = std::max(d.vorticity_vector, norm(q.vorticity_vector - q0.vorticity_vector));
    d.momentum = std::max(d.momentum, std::abs(q.momentum - q0.momentum));
    d.pair_moment = std::max(d.pair_moment, std::abs(q.pair_moment - q0.pair_moment));
    const auto x = rec.states[k].positions();
    const auto a = rec.states[k].intensities();
    const double sc = pair_moment_identity_scale(x, a);
    if (sc > 0.0) d.identity_residual_rel = std::max(d.identity_residual_rel, std::abs(pair_moment_identity_residual(x, a)) / sc);
  }
  auto rel = [](double drift, double v0, double scale) {
    const double s = std::max(std::abs(v0), scale);
    return s > 0.0 ? drift / s : drift;
  };
  d.hamiltonian_rel = rel(d.hamiltonian, q0.hamiltonian, scales.hamiltonian);
  d.vorticity_vector_rel = rel(d.vorticity_vector, norm(q0.vorticity_vector), scales.vorticity_vector);
  d.momentum_rel = rel(d.momentum, q0.momentum, scales.momentum);
  d.pair_moment_rel = rel(d.pair_moment, q0.pair_moment, scales.pair_moment);
  return d;
}

}  // namespace pv
