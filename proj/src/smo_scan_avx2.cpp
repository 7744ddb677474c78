// AVX2 versions of the SMO scans. This file is compiled with -mavx2 and only
// called after a runtime CPU check. It avoids shared inline templates (std::max
// and friends) so no AVX2 instantiation can be picked by the linker for code
// running on other CPUs.

#include <immintrin.h>

#include <cstdint>
#include <limits>

#include "auvlearn/smo_scan.hpp"

namespace auvlearn::smo::avx2 {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double max4(const double* v) {
  double m = v[0];
  for (int u = 1; u < 4; ++u) m = v[u] > m ? v[u] : m;
  return m;
}

// Per-lane running extremum with index; the lane reduction below restores the
// "last index on ties" rule of the serial loops.
struct Lanes {
  __m256d value;
  __m256i index;
};

template <bool kMax>
void reduce(const Lanes& lanes, double& value, std::size_t& index) {
  alignas(32) double v[4];
  alignas(32) std::int64_t k[4];
  _mm256_store_pd(v, lanes.value);
  _mm256_store_si256(reinterpret_cast<__m256i*>(k), lanes.index);
  for (int u = 0; u < 4; ++u) {
    if (k[u] < 0) continue;
    const bool better = kMax ? v[u] > value : v[u] < value;
    const auto ku = static_cast<std::size_t>(k[u]);
    if (better || (v[u] == value && (index == std::size_t(-1) || ku > index))) {
      value = v[u];
      index = ku;
    }
  }
}

inline __m256d blend(__m256d f, __m256d t, __m256d mask) {
  return _mm256_blendv_pd(f, t, mask);
}

inline __m256i blend(__m256i f, __m256i t, __m256d mask) {
  return _mm256_castpd_si256(
      _mm256_blendv_pd(_mm256_castsi256_pd(f), _mm256_castsi256_pd(t), mask));
}

}  // namespace

UpPick select_up(const DualState& s) {
  const std::size_t n = s.n, body = n & ~std::size_t{3};
  const double *ga = s.grad, *gb = s.grad + n, *aa = s.a, *ab = s.a + n;
  const __m256d ninf = _mm256_set1_pd(-kInf), zero = _mm256_setzero_pd(),
                cost = _mm256_set1_pd(s.cost);
  const __m256i step = _mm256_set1_epi64x(4);
  Lanes lanes{ninf, _mm256_set1_epi64x(-1)};
  auto pass = [&](const double* g, const double* av, bool beta, std::size_t offset) {
    __m256i idx = _mm256_add_epi64(_mm256_set_epi64x(3, 2, 1, 0),
                                   _mm256_set1_epi64x(static_cast<std::int64_t>(offset)));
    for (std::size_t t = 0; t < body; t += 4) {
      const __m256d gv = _mm256_loadu_pd(g + t), av4 = _mm256_loadu_pd(av + t);
      const __m256d in = beta ? _mm256_cmp_pd(av4, zero, _CMP_GT_OQ)
                              : _mm256_cmp_pd(av4, cost, _CMP_LT_OQ);
      const __m256d v = blend(ninf, beta ? gv : _mm256_sub_pd(zero, gv), in);
      const __m256d take = _mm256_and_pd(_mm256_cmp_pd(v, lanes.value, _CMP_GE_OQ),
                                         _mm256_cmp_pd(v, ninf, _CMP_GT_OQ));
      lanes.value = blend(lanes.value, v, take);
      lanes.index = blend(lanes.index, idx, take);
      idx = _mm256_add_epi64(idx, step);
    }
  };
  pass(ga, aa, false, 0);
  pass(gb, ab, true, n);
  double gmax = -kInf;
  std::size_t i = std::size_t(-1);
  reduce<true>(lanes, gmax, i);
  // Tails (n not a multiple of 4) compare by value, then by index, so their
  // position in the loop order does not matter.
  auto fold = [&](double v, std::size_t index) {
    if (v >= gmax && v > -kInf) {
      if (v > gmax || i == std::size_t(-1) || index > i) i = index;
      gmax = v;
    }
  };
  for (std::size_t t = body; t < n; ++t) fold(aa[t] < s.cost ? -ga[t] : -kInf, t);
  for (std::size_t t = body; t < n; ++t) fold(ab[t] > 0.0 ? gb[t] : -kInf, t + n);
  if (i == std::size_t(-1)) return {-kInf, 2 * n};
  return {gmax, i};
}

LowPick select_low(const DualState& s, double gmax,
                                                         const double* row_i, double qd_i) {
  const std::size_t n = s.n, body = n & ~std::size_t{3};
  const double *ga = s.grad, *gb = s.grad + n, *aa = s.a, *ab = s.a + n;
  const __m256d vg = _mm256_set1_pd(gmax), vqi = _mm256_set1_pd(qd_i),
                tau = _mm256_set1_pd(kTau), zero = _mm256_setzero_pd(),
                inf = _mm256_set1_pd(kInf), ninf = _mm256_set1_pd(-kInf),
                cost = _mm256_set1_pd(s.cost), two = _mm256_set1_pd(2.0);
  const __m256i step = _mm256_set1_epi64x(4);
  __m256d gap4 = zero;
  Lanes lanes{inf, _mm256_set1_epi64x(-1)};
  auto pass = [&](const double* g, const double* av, bool beta, std::size_t offset) {
    __m256i idx = _mm256_add_epi64(_mm256_set_epi64x(3, 2, 1, 0),
                                   _mm256_set1_epi64x(static_cast<std::int64_t>(offset)));
    for (std::size_t t = 0; t < body; t += 4) {
      const __m256d gv = _mm256_loadu_pd(g + t), av4 = _mm256_loadu_pd(av + t);
      const __m256d in = beta ? _mm256_cmp_pd(av4, cost, _CMP_LT_OQ)
                              : _mm256_cmp_pd(av4, zero, _CMP_GT_OQ);
      const __m256d diff = blend(ninf, beta ? _mm256_sub_pd(vg, gv) : _mm256_add_pd(vg, gv), in);
      const __m256d cand = _mm256_cmp_pd(diff, zero, _CMP_GT_OQ);
      gap4 = _mm256_max_pd(gap4, diff);
      __m256d quad = _mm256_sub_pd(_mm256_add_pd(vqi, _mm256_loadu_pd(s.qd + t)),
                                   _mm256_mul_pd(two, _mm256_loadu_pd(row_i + t)));
      quad = blend(quad, tau, _mm256_cmp_pd(quad, zero, _CMP_LE_OQ));
      const __m256d gain =
          _mm256_div_pd(_mm256_sub_pd(zero, _mm256_mul_pd(diff, diff)), quad);
      const __m256d take = _mm256_and_pd(cand, _mm256_cmp_pd(gain, lanes.value, _CMP_LE_OQ));
      lanes.value = blend(lanes.value, gain, take);
      lanes.index = blend(lanes.index, idx, take);
      idx = _mm256_add_epi64(idx, step);
    }
  };
  pass(ga, aa, false, 0);
  pass(gb, ab, true, n);
  alignas(32) double g4[4];
  _mm256_store_pd(g4, gap4);
  double gap = max4(g4);
  double best = kInf;
  std::size_t j = std::size_t(-1);
  reduce<false>(lanes, best, j);
  auto fold = [&](double grad_diff, std::size_t t, std::size_t index) {
    if (!(grad_diff > 0.0)) return;
    if (grad_diff > gap) gap = grad_diff;
    double quad = qd_i + s.qd[t] - 2.0 * row_i[t];
    if (quad <= 0.0) quad = kTau;
    const double gain = -(grad_diff * grad_diff) / quad;
    if (gain < best || (gain == best && (j == std::size_t(-1) || index > j))) {
      best = gain;
      j = index;
    }
  };
  for (std::size_t t = body; t < n; ++t) fold(gmax + (aa[t] > 0.0 ? ga[t] : -kInf), t, t);
  for (std::size_t t = body; t < n; ++t)
    fold(gmax - (ab[t] < s.cost ? gb[t] : kInf), t, t + n);
  return {gap, j == std::size_t(-1) ? 2 * n : j};
}

}  // namespace auvlearn::smo::avx2
