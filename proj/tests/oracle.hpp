#pragma once

// Independent reference implementations used as test oracles. None of these call into the
// library's numerical code; they share only the Vec2 value type.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <pointvortex/vec2.hpp>

namespace oracle {

using cplx = std::complex<long double>;

// Values computed with 40-digit arithmetic (mpmath findroot on g, closed-form a, C' from the exact
// field at t = 0 on the triangle x1 = (0, -lambda), x2 = (1, 0), x3 = 0).
struct SelfSimilarReference {
  double alpha;
  double lambda;
  double a;
  double c_prime;
  double T;
  double D;
};

inline constexpr SelfSimilarReference kSelfSimilar[] = {
    {0.5, 0.67973171257335726537, -0.51973150196560026623, 0.54703098965298508653, 1.8280499988389334435,
     1.6091045014747802591},
    {1.0, 0.7071067811865475244, -0.5, 0.94280904158206336587, 1.0606601717798212866, 1.6666666666666666667},
    {2.0, 0.75161462581115055366, -0.46951683290925876756, 1.9525540959711857864, 0.51214970282429357641,
     1.7601658274099507918},
    {3.0, 0.78615137775742328607, -0.44721359549995793928, 3.1446055110296931443, 0.31800491237851724106,
     1.8291796067500630911},
};

// v_i = sum_j a_j * i (z_i - z_j) / |z_i - z_j|^(alpha+1), in long double complex arithmetic.
inline std::vector<pv::Vec2> velocity(const std::vector<pv::Vec2>& x, const std::vector<double>& a, double alpha) {
  std::vector<pv::Vec2> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    cplx s{0, 0};
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i == j) continue;
      const cplx d{static_cast<long double>(x[i].x) - x[j].x, static_cast<long double>(x[i].y) - x[j].y};
      s += static_cast<long double>(a[j]) * cplx{0, 1} * d / std::pow(std::abs(d), static_cast<long double>(alpha) + 1);
    }
    out[i] = {static_cast<double>(s.real()), static_cast<double>(s.imag())};
  }
  return out;
}

inline long double kernel(long double alpha, long double r) {
  if (alpha == 1) return std::log(r);
  return (std::pow(r, 1 - alpha) - 1) / (1 - alpha);
}

inline double hamiltonian(const std::vector<pv::Vec2>& x, const std::vector<double>& a, double alpha) {
  long double h = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i == j) continue;
      const long double r = std::hypot(static_cast<long double>(x[i].x) - x[j].x, static_cast<long double>(x[i].y) - x[j].y);
      h += 0.5L * a[i] * a[j] * kernel(alpha, r);
    }
  return static_cast<double>(h);
}

// min over nonempty strict subsets of |sum|, by recursion over include/exclude decisions.
inline double min_strict_subset_sum(const std::vector<double>& a) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = a.size();
  std::vector<int> pick(n, 0);
  auto rec = [&](auto&& self, std::size_t k, long double sum, std::size_t count) -> void {
    if (k == n) {
      if (count > 0 && count < n) best = std::min(best, static_cast<double>(std::fabs(sum)));
      return;
    }
    self(self, k + 1, sum, count);
    self(self, k + 1, sum + a[k], count + 1);
  };
  rec(rec, 0, 0.0L, 0);
  return best;
}

inline double dist(const pv::Vec2& p, const pv::Vec2& q) { return std::hypot(p.x - q.x, p.y - q.y); }

// Exhaustive certification of a cluster partition against the raw points.
struct Certificate {
  bool is_partition{true};
  bool intra{true};
  bool inter{true};
  bool delta_range{true};
};

inline Certificate certify(const std::vector<pv::Vec2>& pts, const std::vector<std::vector<std::size_t>>& parts,
                           double delta, double kappa, double d) {
  Certificate c;
  std::vector<int> owner(pts.size(), -1);
  for (std::size_t p = 0; p < parts.size(); ++p)
    for (std::size_t i : parts[p]) {
      if (i >= pts.size() || owner[i] != -1) c.is_partition = false;
      else owner[i] = static_cast<int>(p);
    }
  for (int o : owner)
    if (o < 0) c.is_partition = false;
  if (!c.is_partition) return c;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double r = dist(pts[i], pts[j]);
      if (owner[i] == owner[j]) {
        if (r > delta) c.intra = false;
      } else if (r < delta / kappa) {
        c.inter = false;
      }
    }
  const double lo = 0.5 * std::pow(kappa / 8.0, static_cast<double>(pts.size())) * d;
  c.delta_range = delta >= lo && delta < d;
  return c;
}

// Classical RK4 in long double with a fixed step; slow but structurally unrelated to the library's
// adaptive integrator.
inline std::vector<pv::Vec2> rk4(std::vector<pv::Vec2> x0, const std::vector<double>& a, double alpha, double t1,
                                 std::size_t steps) {
  const std::size_t n = x0.size();
  std::vector<cplx> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = {x0[i].x, x0[i].y};
  auto f = [&](const std::vector<cplx>& y) {
    std::vector<cplx> v(n, cplx{0, 0});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const cplx d = y[i] - y[j];
        v[i] += static_cast<long double>(a[j]) * cplx{0, 1} * d / std::pow(std::abs(d), static_cast<long double>(alpha) + 1);
      }
    return v;
  };
  const long double h = static_cast<long double>(t1) / static_cast<long double>(steps);
  std::vector<cplx> tmp(n);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto k1 = f(z);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h / 2 * k1[i];
    const auto k2 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h / 2 * k2[i];
    const auto k3 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h * k3[i];
    const auto k4 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) z[i] += h / 6 * (k1[i] + 2.0L * k2[i] + 2.0L * k3[i] + k4[i]);
  }
  std::vector<pv::Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {static_cast<double>(z[i].real()), static_cast<double>(z[i].imag())};
  return out;
}

// Hand-rolled generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
  bool coin() { return uniform(0.0, 1.0) < 0.5; }

  pv::Vec2 point(double box) { return {uniform(-box, box), uniform(-box, box)}; }

  std::vector<pv::Vec2> separated_points(std::size_t n, double box, double min_sep) {
    for (;;) {
      std::vector<pv::Vec2> x;
      for (std::size_t i = 0; i < n; ++i) x.push_back(point(box));
      bool ok = true;
      for (std::size_t i = 0; i < n && ok; ++i)
        for (std::size_t j = i + 1; j < n && ok; ++j) ok = dist(x[i], x[j]) >= min_sep;
      if (ok) return x;
    }
  }

  std::vector<double> intensities(std::size_t n, bool mixed = true) {
    std::vector<double> a;
    for (std::size_t i = 0; i < n; ++i) {
      double v = uniform(0.5, 1.5);
      if (mixed && coin()) v = -v;
      a.push_back(v);
    }
    return a;
  }

  // Points drawn as a few tight groups at widely varying scales, to stress cluster detection.
  std::vector<pv::Vec2> multiscale_points(std::size_t n) {
    std::vector<pv::Vec2> x;
    const std::size_t groups = index(1, n);
    std::vector<pv::Vec2> centers;
    for (std::size_t g = 0; g < groups; ++g) centers.push_back(point(10.0));
    for (std::size_t i = 0; i < n; ++i) {
      const pv::Vec2 c = centers[index(0, groups - 1)];
      const double spread = std::pow(10.0, uniform(-9.0, 1.0));
      x.push_back({c.x + spread * uniform(-1, 1), c.y + spread * uniform(-1, 1)});
    }
    return x;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace oracle
