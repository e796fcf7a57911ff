#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "errors.hpp"

namespace pv {

inline constexpr std::size_t kMaxSubsetEnumeration = 25;

/// Degeneracy parameters of a family of intensities.
///   A0 = min over nonempty strict subsets P of |sum_P a_k|
///   A  = min(A0, |sum a_i|)
///   a  = sum |a_i|          (a_abs_sum)
///   a0 = |sum a_i|          (a_total_abs)
/// A > 0 is the non-neutral clusters hypothesis, A0 > 0 the non-neutral sub-clusters hypothesis.
struct DegeneracyParams {
  double A{0.0};
  double A0{0.0};
  double a_abs_sum{0.0};
  double a_total_abs{0.0};
};

/// Exhaustive scan of the 2^N subset sums (Gray-code order, one addition per subset).
/// Refuses N > 25. For N = 1 there is no strict subset and A0 is reported as |a_1|.
inline DegeneracyParams degeneracy_params(std::span<const double> a) {
  const std::size_t n = a.size();
  if (n == 0) throw PreconditionError("degeneracy_params needs at least one intensity");
  if (n > kMaxSubsetEnumeration) {
    throw SizeLimit("degeneracy_params enumerates 2^N subsets; N = " + std::to_string(n) + " exceeds " +
                    std::to_string(kMaxSubsetEnumeration));
  }
  DegeneracyParams out;
  double total = 0.0;
  for (double v : a) {
    out.a_abs_sum += std::abs(v);
    total += v;
  }
  out.a_total_abs = std::abs(total);

  if (n == 1) {
    out.A0 = out.a_abs_sum;
  } else {
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    double best = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::uint64_t gray = 0;
    for (std::uint64_t k = 1; k <= full; ++k) {
      const std::uint64_t next = k ^ (k >> 1);
      const std::uint64_t flipped = next ^ gray;
      const int bit = std::countr_zero(flipped);
      sum += (next & flipped) ? a[bit] : -a[bit];
      gray = next;
      if (gray != full) best = std::min(best, std::abs(sum));
    }
    out.A0 = best;
  }
  out.A = std::min(out.A0, out.a_total_abs);
  return out;
}

}  // namespace pv
