#pragma once

// Working-pair scans of the SMO loop over the 2n dual variables
// (0..n-1 alpha, n..2n-1 beta). `serial::` is the plain loop; the dispatching
// versions use AVX2 when the CPU has it and return the same values and indices.

#include <cstddef>

namespace auvlearn::smo {

struct DualState {
  const double* grad;  // 2n gradient entries
  const double* a;     // 2n variables
  const double* qd;    // n kernel diagonal entries
  std::size_t n;
  double cost;
};

// Largest -y_t grad_t over I_up, last index on ties; index 2n if I_up is empty.
struct UpPick {
  double gmax;
  std::size_t index;
};

// Partner with the lowest second-order gain -(gmax - m_t)^2 / quad_t among
// I_low members with gmax - m_t > 0, last index on ties (2n if none); gap is
// the largest such difference, 0 if none.
struct LowPick {
  double gap;
  std::size_t index;
};

namespace serial {
UpPick select_up(const DualState& s);
LowPick select_low(const DualState& s, double gmax, const double* row_i, double qd_i);
}  // namespace serial

UpPick select_up(const DualState& s);
LowPick select_low(const DualState& s, double gmax, const double* row_i, double qd_i);

// True when the vector code path is in use.
bool vectorized();

}  // namespace auvlearn::smo
