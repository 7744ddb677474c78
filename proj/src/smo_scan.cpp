#include "auvlearn/smo_scan.hpp"

#include <algorithm>
#include <limits>

#if defined(__x86_64__) || defined(__i386__)
#define AUVLEARN_X86 1
#endif

namespace auvlearn::smo {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

namespace serial {

UpPick select_up(const DualState& s) {
  const std::size_t n = s.n;
  const double *ga = s.grad, *gb = s.grad + n, *aa = s.a, *ab = s.a + n;
  // Membership is a select rather than a branch: it is unpredictable, the
  // update is not.
  double gmax = -kInf;
  std::size_t i = 2 * n;
  for (std::size_t t = 0; t < n; ++t) {
    const double v = aa[t] < s.cost ? -ga[t] : -kInf;
    if (v >= gmax && v > -kInf) {
      gmax = v;
      i = t;
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    const double v = ab[t] > 0.0 ? gb[t] : -kInf;
    if (v >= gmax && v > -kInf) {
      gmax = v;
      i = t + n;
    }
  }
  return {gmax, i};
}

LowPick select_low(const DualState& s, double gmax, const double* row_i, double qd_i) {
  const std::size_t n = s.n;
  const double *ga = s.grad, *gb = s.grad + n, *aa = s.a, *ab = s.a + n;
  double gap = 0.0, best = kInf;
  std::size_t j = 2 * n;
  auto consider = [&](double grad_diff, std::size_t t, std::size_t index) {
    if (!(grad_diff > 0.0)) return;
    gap = std::max(gap, grad_diff);
    double quad = qd_i + s.qd[t] - 2.0 * row_i[t];
    if (quad <= 0.0) quad = kTau;
    const double gain = -(grad_diff * grad_diff) / quad;
    if (gain <= best) {
      best = gain;
      j = index;
    }
  };
  for (std::size_t t = 0; t < n; ++t) consider(gmax + (aa[t] > 0.0 ? ga[t] : -kInf), t, t);
  for (std::size_t t = 0; t < n; ++t) consider(gmax - (ab[t] < s.cost ? gb[t] : kInf), t, t + n);
  return {gap, j};
}

}  // namespace serial

#ifdef AUVLEARN_X86

namespace avx2 {
UpPick select_up(const DualState& s);
LowPick select_low(const DualState& s, double gmax, const double* row_i, double qd_i);
}  // namespace avx2

namespace {

const bool kHaveAvx2 = __builtin_cpu_supports("avx2");

}  // namespace

bool vectorized() { return kHaveAvx2; }

UpPick select_up(const DualState& s) {
  return kHaveAvx2 ? avx2::select_up(s) : serial::select_up(s);
}

LowPick select_low(const DualState& s, double gmax, const double* row_i, double qd_i) {
  return kHaveAvx2 ? avx2::select_low(s, gmax, row_i, qd_i) : serial::select_low(s, gmax, row_i, qd_i);
}

#else

bool vectorized() { return false; }

UpPick select_up(const DualState& s) { return serial::select_up(s); }

LowPick select_low(const DualState& s, double gmax, const double* row_i, double qd_i) {
  return serial::select_low(s, gmax, row_i, qd_i);
}

#endif

}  // namespace auvlearn::smo
