#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "state.hpp"
#include "vec2.hpp"

namespace pv {

/// Any vector field the integrator can drive: evaluates velocities in place and reports the
/// invariants recorded with each sample.
template <class F>
concept VectorField = requires(const F& f, std::span<const Vec2> x, std::span<Vec2> v) {
  f(x, v);
  { f.invariants(x) } -> std::same_as<InvariantSample>;
};

struct IntegratorOptions {
  double rel_tol{1e-12};
  double abs_tol{1e-14};
  double max_step{std::numeric_limits<double>::infinity()};
  double initial_step{0.0};  // 0 selects the step automatically
  double min_step{1e-280};
  // Minimal pairwise distance at which a run is declared collapsed.
  double collapse_radius{1e-6};
  std::size_t max_steps{2'000'000};
  // Extra dense-output sample times (any order; values outside (t0, t1] are ignored).
  std::vector<double> output_times;
  // Record every accepted controller step in addition to the dense samples.
  bool record_steps{true};

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw PreconditionError("integrator tolerances must be positive");
    if (!(collapse_radius > 0.0)) throw PreconditionError("collapse_radius must be positive");
    if (!(max_step > 0.0)) throw PreconditionError("max_step must be positive");
    if (!(min_step > 0.0)) throw PreconditionError("min_step must be positive");
    if (initial_step < 0.0) throw PreconditionError("initial_step must be >= 0");
    if (max_steps == 0) throw PreconditionError("max_steps must be positive");
  }
};

enum class Termination { reached_final_time, collapsed, step_limit, singular_failure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::reached_final_time: return "reached_final_time";
    case Termination::collapsed: return "collapsed";
    case Termination::step_limit: return "step_limit";
    case Termination::singular_failure: return "singular_failure";
  }
  return "unknown";
}

/// Time kept as an unevaluated sum hi + lo. Near a collapse the steps fall far below ulp(t).
struct CompensatedTime {
  double hi{0.0};
  double lo{0.0};

  void add(double h) {
    const double s = hi + h;
    const double bb = s - hi;
    const double err = (hi - (s - bb)) + (h - bb);
    hi = s;
    lo += err;
    const double s2 = hi + lo;
    lo = lo - (s2 - hi);
    hi = s2;
  }
  double value() const { return hi + lo; }
  // (target - *this), accurate when target is close to the represented time.
  double distance_to(double target) const { return (target - hi) - lo; }
};

/// One Dormand-Prince step with Shampine's continuous extension (4th order).
struct DenseSegment {
  CompensatedTime t0;
  double h{0.0};
  std::array<std::vector<Vec2>, 5> coeff;

  std::vector<Vec2> positions(double theta) const {
    const double theta1 = 1.0 - theta;
    std::vector<Vec2> y(coeff[0].size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = coeff[0][i] +
             theta * (coeff[1][i] + theta1 * (coeff[2][i] + theta * (coeff[3][i] + theta1 * coeff[4][i])));
    }
    return y;
  }

  double time(double theta) const {
    CompensatedTime t = t0;
    t.add(theta * h);
    return t.value();
  }
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<VortexState> states;
  std::vector<InvariantSample> invariants;
  Termination termination{Termination::reached_final_time};
  std::optional<double> collapse_time;
  double collapse_radius{0.0};
  // The step in which the collapse radius was crossed; lets the crossing be re-refined.
  std::optional<DenseSegment> final_segment;
  std::size_t accepted_steps{0};
  std::size_t rejected_steps{0};
  std::string message;
  std::vector<std::string> warnings;

  std::size_t size() const { return times.size(); }
  double t_start() const { return times.front(); }
  double t_end() const { return times.back(); }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
namespace dp {
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                        a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                        e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

inline bool all_finite(std::span<const Vec2> y) {
  return std::all_of(y.begin(), y.end(), [](const Vec2& v) { return isfinite(v); });
}

// Weighted RMS over all scalar components.
inline double error_norm(std::span<const Vec2> err, std::span<const Vec2> y0, std::span<const Vec2> y1,
                         double rtol, double atol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sx = atol + rtol * std::max(std::abs(y0[i].x), std::abs(y1[i].x));
    const double sy = atol + rtol * std::max(std::abs(y0[i].y), std::abs(y1[i].y));
    acc += (err[i].x / sx) * (err[i].x / sx) + (err[i].y / sy) * (err[i].y / sy);
  }
  return std::sqrt(acc / static_cast<double>(2 * err.size()));
}

// First theta in (0, 1] at which dmin drops to `radius` (sampled on a coarse grid, then
// bisected to full precision). Returns nullopt if the step never reaches the radius.
inline std::optional<double> find_radius_crossing(const DenseSegment& seg, double radius) {
  constexpr std::array<double, 4> grid{0.25, 0.5, 0.75, 1.0};
  double lo = 0.0;
  std::optional<double> hi;
  for (double th : grid) {
    if (min_pair_distance(seg.positions(th)) <= radius) {
      hi = th;
      break;
    }
    lo = th;
  }
  if (!hi) return std::nullopt;
  double a = lo;
  double b = *hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (min_pair_distance(seg.positions(mid)) <= radius) {
      b = mid;
    } else {
      a = mid;
    }
  }
  return b;
}

template <class Field>
std::optional<std::string> diagnose(const Field& field, std::span<const Vec2> x) {
  if constexpr (requires { { field.diagnose(x) } -> std::same_as<std::optional<std::string>>; }) {
    return field.diagnose(x);
  } else {
    return std::nullopt;
  }
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of the vortex ODE on [t0, t1] with PI step control.
///
/// Samples are recorded at every accepted step (if `record_steps`) and at the requested
/// `output_times` (dense output). The run stops early with `Termination::collapsed` when the
/// minimal pair distance reaches `collapse_radius`; the crossing time is located by bisection on
/// the dense output and the final sample sits at (or just inside) the radius.
template <VectorField Field>
TrajectoryRecord integrate(const VortexState& initial, double t0, double t1, const IntegratorOptions& opts,
                           const Field& field) {
  namespace dp = detail::dp;
  opts.validate();
  if (!(t1 > t0)) throw PreconditionError("integrate requires t1 > t0");

  const std::size_t n = initial.size();
  const auto a_span = initial.intensities();
  const std::vector<double> intensities(a_span.begin(), a_span.end());
  const double alpha = initial.alpha();

  TrajectoryRecord rec;
  rec.collapse_radius = opts.collapse_radius;

  auto push_sample = [&](double t, std::vector<Vec2> x) {
    InvariantSample inv = field.invariants(x);
    VortexState st(std::move(x), intensities, alpha);
    if (!rec.times.empty() && t <= rec.times.back()) {
      rec.states.back() = std::move(st);
      rec.invariants.back() = inv;
      return;
    }
    rec.times.push_back(t);
    rec.states.push_back(std::move(st));
    rec.invariants.push_back(inv);
  };

  std::vector<Vec2> y(initial.positions().begin(), initial.positions().end());
  push_sample(t0, y);
  if (min_pair_distance(y) <= opts.collapse_radius) {
    rec.termination = Termination::collapsed;
    rec.collapse_time = t0;
    return rec;
  }

  std::vector<double> outputs;
  for (double t : opts.output_times)
    if (t > t0 && t <= t1) outputs.push_back(t);
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  std::size_t next_output = 0;

  std::vector<Vec2> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);
  auto eval = [&](std::span<const Vec2> x, std::vector<Vec2>& out) { field(x, out); };

  CompensatedTime t{t0, 0.0};
  try {
    eval(y, k1);
  } catch (const Error& e) {
    rec.termination = Termination::singular_failure;
    rec.message = e.what();
    return rec;
  }

  const double rtol = opts.rel_tol;
  const double atol = opts.abs_tol;
  double h = opts.initial_step;
  if (h == 0.0) {
    // Hairer's starting-step heuristic.
    const double d0 = detail::error_norm(y, y, y, rtol, atol);
    const double d1 = detail::error_norm(k1, y, y, rtol, atol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k1[i];
    double h1 = 0.0;
    try {
      eval(tmp, k2);
      for (std::size_t i = 0; i < n; ++i) err[i] = k2[i] - k1[i];
      const double d2 = detail::error_norm(err, y, y, rtol, atol) / h0;
      const double dm = std::max(d1, d2);
      h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    } catch (const Error&) {
      h1 = h0 * 1e-3;
    }
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, opts.max_step, t1 - t0});

  constexpr double safe = 0.9;
  constexpr double beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;
  constexpr double fac_min = 0.2;   // h_new / h >= 0.2
  constexpr double fac_max = 10.0;  // h_new / h <= 10
  double fac_old = 1e-4;
  bool last_rejected = false;

  while (true) {
    if (rec.accepted_steps + rec.rejected_steps >= opts.max_steps) {
      rec.termination = Termination::step_limit;
      rec.message = "maximum number of steps reached";
      break;
    }
    const double remaining = t.distance_to(t1);
    bool last = false;
    if (h >= remaining * (1.0 - 1e-13)) {
      h = remaining;
      last = true;
    }
    if (h < opts.min_step) {
      rec.termination = Termination::singular_failure;
      rec.message = "step size underflow";
      break;
    }

    bool stage_failed = false;
    try {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (dp::a21 * k1[i]);
      eval(tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (dp::a31 * k1[i] + dp::a32 * k2[i]);
      eval(tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (dp::a41 * k1[i] + dp::a42 * k2[i] + dp::a43 * k3[i]);
      eval(tmp, k4);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = y[i] + h * (dp::a51 * k1[i] + dp::a52 * k2[i] + dp::a53 * k3[i] + dp::a54 * k4[i]);
      eval(tmp, k5);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = y[i] + h * (dp::a61 * k1[i] + dp::a62 * k2[i] + dp::a63 * k3[i] + dp::a64 * k4[i] + dp::a65 * k5[i]);
      eval(tmp, k6);
      for (std::size_t i = 0; i < n; ++i)
        y_new[i] = y[i] + h * (dp::a71 * k1[i] + dp::a73 * k3[i] + dp::a74 * k4[i] + dp::a75 * k5[i] + dp::a76 * k6[i]);
      eval(y_new, k7);
      stage_failed = !detail::all_finite(y_new) || !detail::all_finite(k7);
    } catch (const Error&) {
      stage_failed = true;
    }
    if (stage_failed) {
      // A stage landed on a singular or out-of-domain point: retry with a much smaller step.
      ++rec.rejected_steps;
      h *= 0.25;
      last_rejected = true;
      continue;
    }

    for (std::size_t i = 0; i < n; ++i)
      err[i] = h * (dp::e1 * k1[i] + dp::e3 * k3[i] + dp::e4 * k4[i] + dp::e5 * k5[i] + dp::e6 * k6[i] + dp::e7 * k7[i]);
    const double error = detail::error_norm(err, y, y_new, rtol, atol);
    const double fac11 = std::pow(std::max(error, 1e-300), expo1);

    if (!(error <= 1.0)) {
      ++rec.rejected_steps;
      h /= std::min(1.0 / fac_min, fac11 / safe);
      last_rejected = true;
      continue;
    }

    // Accepted.
    ++rec.accepted_steps;
    DenseSegment seg;
    seg.t0 = t;
    seg.h = h;
    seg.coeff[0] = y;
    seg.coeff[1].resize(n);
    seg.coeff[2].resize(n);
    seg.coeff[3].resize(n);
    seg.coeff[4].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 dy = y_new[i] - y[i];
      const Vec2 bspl = h * k1[i] - dy;
      seg.coeff[1][i] = dy;
      seg.coeff[2][i] = bspl;
      seg.coeff[3][i] = dy - h * k7[i] - bspl;
      seg.coeff[4][i] = h * (dp::d1 * k1[i] + dp::d3 * k3[i] + dp::d4 * k4[i] + dp::d5 * k5[i] + dp::d6 * k6[i] +
                             dp::d7 * k7[i]);
    }

    const std::optional<double> crossing = detail::find_radius_crossing(seg, opts.collapse_radius);
    const double theta_stop = crossing.value_or(1.0);

    while (next_output < outputs.size()) {
      const double theta = t.distance_to(outputs[next_output]) / h;
      if (theta > theta_stop) break;
      if (theta > 0.0 && theta < theta_stop) push_sample(outputs[next_output], seg.positions(theta));
      ++next_output;
    }

    if (crossing) {
      const double tc = seg.time(*crossing);
      push_sample(tc, seg.positions(*crossing));
      rec.termination = Termination::collapsed;
      rec.collapse_time = tc;
      rec.final_segment = std::move(seg);
      break;
    }

    t.add(h);
    y = y_new;
    k1 = k7;
    if (auto w = detail::diagnose(field, y); w && rec.warnings.empty()) rec.warnings.push_back(*w);

    if (last) {
      push_sample(t1, y);
      rec.termination = Termination::reached_final_time;
      break;
    }
    if (opts.record_steps) push_sample(t.value(), y);

    double fac = fac11 / std::pow(fac_old, beta);
    fac = std::max(1.0 / fac_max, std::min(1.0 / fac_min, fac / safe));
    double h_new = h / fac;
    if (last_rejected) h_new = std::min(h_new, h);
    fac_old = std::max(error, 1e-4);
    last_rejected = false;
    h = std::min(h_new, opts.max_step);
  }
  return rec;
}

inline TrajectoryRecord integrate(const VortexState& initial, double t0, double t1,
                                  const IntegratorOptions& opts = {}) {
  return integrate(initial, t0, t1, opts, PlanarField(initial));
}

/// Collapse time of a collapsed record: bisection of the collapse-radius crossing on the dense
/// output of the final step when available, otherwise on the piecewise-linear interpolant of the
/// sampled minimal distances.
inline double refine_collapse_time(const TrajectoryRecord& rec) {
  if (rec.termination != Termination::collapsed) {
    throw NoCollapse(std::string("record terminated with ") + to_string(rec.termination) + ", not a collapse");
  }
  const double radius = rec.collapse_radius;
  if (rec.final_segment) {
    if (auto theta = detail::find_radius_crossing(*rec.final_segment, radius)) return rec.final_segment->time(*theta);
  }
  if (rec.times.empty()) throw PreconditionError("empty record");
  std::size_t k = rec.times.size() - 1;
  if (rec.invariants[k].min_pair_distance > radius) {
    throw PreconditionError("last sample of a collapsed record lies outside the collapse radius");
  }
  while (k > 0 && rec.invariants[k - 1].min_pair_distance <= radius) --k;
  if (k == 0) return rec.times.front();
  const double ta = rec.times[k - 1], tb = rec.times[k];
  const double da = rec.invariants[k - 1].min_pair_distance, db = rec.invariants[k].min_pair_distance;
  auto dmin = [&](double tt) { return da + (db - da) * (tt - ta) / (tb - ta); };
  double lo = ta, hi = tb;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (dmin(mid) <= radius) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace pv
