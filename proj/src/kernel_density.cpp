#include "auvlearn/kernel_density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace auvlearn {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double e : v) {
    if (!std::isfinite(e)) throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(got) +
                                ", expected " + std::to_string(want));
  }
}

}  // namespace

std::vector<double> flatten(std::span<const FeatureVector> points, std::size_t dim) {
  std::vector<double> out;
  out.reserve(points.size() * dim);
  for (const auto& p : points) {
    require_dim(p.size(), dim, "flatten");
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

KernelParams::KernelParams(std::vector<double> feature_scales, double gamma)
    : scales_(std::move(feature_scales)), gamma_(gamma) {
  if (scales_.empty()) throw std::invalid_argument("KernelParams: empty feature scales");
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_))
    throw std::invalid_argument("KernelParams: gamma must be positive");
  weights_.reserve(scales_.size());
  for (double s : scales_) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("KernelParams: feature scales must be positive and finite");
    weights_.push_back(gamma_ / s);
  }
}

BandwidthMatrix::BandwidthMatrix(double scale, std::vector<double> base)
    : scale_(scale), base_(std::move(base)), det_(1.0) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_))
    throw std::invalid_argument("BandwidthMatrix: scale must be positive");
  if (base_.empty()) throw std::invalid_argument("BandwidthMatrix: empty base");
  inv_sq_.reserve(base_.size());
  for (double b : base_) {
    if (!(b > 0.0) || !std::isfinite(b))
      throw std::invalid_argument("BandwidthMatrix: base entries must be positive and finite");
    const double hj = scale_ * b;
    det_ *= hj;
    inv_sq_.push_back(1.0 / (hj * hj));
  }
}

double kernel_eval(std::span<const double> x, std::span<const double> z, const KernelParams& p) {
  require_dim(x.size(), p.dim(), "kernel_eval");
  require_dim(z.size(), p.dim(), "kernel_eval");
  require_finite(x, "kernel_eval");
  require_finite(z, "kernel_eval");
  return weighted_sq_exp(x.data(), z.data(), p.weights().data(), p.dim());
}

std::vector<double> kernel_row(std::span<const double> x, std::span<const FeatureVector> buffer,
                               const KernelParams& p) {
  std::vector<double> row;
  row.reserve(buffer.size());
  for (const auto& z : buffer) row.push_back(kernel_eval(x, z, p));
  return row;
}

double kde_density(std::span<const double> x, std::span<const FeatureVector> buffer,
                   const BandwidthMatrix& h) {
  if (buffer.empty()) throw std::invalid_argument("kde_density: empty buffer");
  require_dim(x.size(), h.dim(), "kde_density");
  require_finite(x, "kde_density");
  double sum = 0.0;
  for (const auto& xi : buffer) {
    require_dim(xi.size(), h.dim(), "kde_density");
    sum += weighted_sq_exp(x.data(), xi.data(), h.inv_sq_widths().data(), h.dim());
  }
  return sum / (static_cast<double>(buffer.size()) * h.det());
}

std::vector<double> feature_variances(PointSet points) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("feature_variances: need at least 2 points");
  std::vector<double> mean(points.dim, 0.0), var(points.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < points.dim; ++j) mean[j] += points[i][j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < points.dim; ++j) {
      const double d = points[i][j] - mean[j];
      var[j] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(n - 1);
  return var;
}

BandwidthMatrix fit_bandwidth(PointSet buffer, double scale) {
  if (buffer.size() < 2) throw std::invalid_argument("fit_bandwidth: need at least 2 points");
  if (!(scale > 0.0)) throw std::invalid_argument("fit_bandwidth: scale must be positive");
  std::vector<double> sd = feature_variances(buffer);
  for (double& v : sd) v = std::sqrt(v);
  const double largest = *std::max_element(sd.begin(), sd.end());
  const double floor = std::max(1e-6 * largest, 1e-9);
  for (double& s : sd) s = std::max(s, floor);
  return BandwidthMatrix(scale, std::move(sd));
}

BandwidthMatrix fit_bandwidth(std::span<const FeatureVector> buffer, double scale) {
  if (buffer.size() < 2) throw std::invalid_argument("fit_bandwidth: need at least 2 points");
  const std::size_t dim = buffer.front().size();
  const std::vector<double> flat = flatten(buffer, dim);
  return fit_bandwidth(PointSet{flat, dim}, scale);
}

}  // namespace auvlearn
