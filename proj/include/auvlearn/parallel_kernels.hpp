#pragma once

// Batch kernel evaluations over point sets. Every routine exists twice:
// `serial::` is the reference loop, `omp::` the OpenMP version. Each output
// element is produced by exactly one thread with the same operation order as
// the serial loop, so both variants agree bit for bit.

#include <span>
#include <vector>

#include "auvlearn/kernel_density.hpp"

namespace auvlearn::kernels {

// out[i * points.size() + j] = exp(-sum_d w_d (q_i - p_j)_d^2)
#define AUVLEARN_KERNEL_DECLS                                                              \
  void cross(PointSet queries, PointSet points, std::span<const double> w,                 \
             std::span<double> out);                                                       \
  void gram(PointSet points, std::span<const double> w, std::span<double> out);            \
  void predict(PointSet queries, PointSet points, std::span<const double> coef, double bias, \
               std::span<const double> w, std::span<double> out);                          \
  void row_sums(PointSet points, std::span<const double> w, std::span<double> out);

namespace serial {
AUVLEARN_KERNEL_DECLS
}
namespace omp {
AUVLEARN_KERNEL_DECLS
}

#undef AUVLEARN_KERNEL_DECLS

// Convenience wrappers, dispatching to the OpenMP variants.
std::vector<double> cross(PointSet queries, PointSet points, std::span<const double> w);
std::vector<double> gram(PointSet points, std::span<const double> w);
std::vector<double> predict(PointSet queries, PointSet points, std::span<const double> coef,
                            double bias, std::span<const double> w);
std::vector<double> row_sums(PointSet points, std::span<const double> w);

}  // namespace auvlearn::kernels
