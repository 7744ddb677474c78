#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace auvlearn {

using FeatureVector = std::vector<double>;

// Row-major view over a set of equal-length feature vectors.
struct PointSet {
  std::span<const double> data;
  std::size_t dim = 0;

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  const double* operator[](std::size_t i) const { return data.data() + i * dim; }
};

/// Flattens a list of feature vectors into row-major storage.
std::vector<double> flatten(std::span<const FeatureVector> points, std::size_t dim);

/// Squared-exponential kernel parameters.
///
/// k(x, z) = exp(-sum_j (x_j - z_j)^2 * gamma / scale_j), where scale_j is the
/// per-feature variance of the calibration data.
class KernelParams {
 public:
  KernelParams(std::vector<double> feature_scales, double gamma);

  std::size_t dim() const { return scales_.size(); }
  double gamma() const { return gamma_; }
  std::span<const double> feature_scales() const { return scales_; }
  // gamma / scale_j, precomputed for the hot loops.
  std::span<const double> weights() const { return weights_; }

  KernelParams with_gamma(double gamma) const { return {scales_, gamma}; }

 private:
  std::vector<double> scales_;
  double gamma_;
  std::vector<double> weights_;
};

/// Diagonal KDE bandwidth H = scale * diag(base).
class BandwidthMatrix {
 public:
  BandwidthMatrix(double scale, std::vector<double> base);

  double scale() const { return scale_; }
  std::span<const double> base() const { return base_; }
  std::size_t dim() const { return base_.size(); }
  double det() const { return det_; }
  // 1 / (scale * base_j)^2
  std::span<const double> inv_sq_widths() const { return inv_sq_; }

 private:
  double scale_;
  std::vector<double> base_;
  double det_;
  std::vector<double> inv_sq_;
};

// Unchecked exp(-sum_j w_j (a_j - b_j)^2); callers validate dimensions.
inline double weighted_sq_exp(const double* a, const double* b, const double* w,
                              std::size_t dim) {
  double acc = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    acc += d * d * w[j];
  }
  return std::exp(-acc);
}

double kernel_eval(std::span<const double> x, std::span<const double> z, const KernelParams& p);

std::vector<double> kernel_row(std::span<const double> x, std::span<const FeatureVector> buffer,
                               const KernelParams& p);

/// Unnormalized Gaussian KDE: (1/n) sum_i exp(-|H^-1 (x - x_i)|^2) / det(H).
double kde_density(std::span<const double> x, std::span<const FeatureVector> buffer,
                   const BandwidthMatrix& h);

/// H_jj = scale * sample std-dev of feature j, with a floor for constant features.
BandwidthMatrix fit_bandwidth(std::span<const FeatureVector> buffer, double scale);
BandwidthMatrix fit_bandwidth(PointSet buffer, double scale);

/// Per-feature sample variance (n - 1 denominator).
std::vector<double> feature_variances(PointSet points);

}  // namespace auvlearn
