#include "auvlearn/parallel_kernels.hpp"

#include <cstdint>
#include <stdexcept>

namespace auvlearn::kernels {

namespace {

void check(PointSet a, PointSet b, std::span<const double> w) {
  if (a.dim != w.size() || b.dim != w.size())
    throw std::invalid_argument("kernels: dimension mismatch between points and weights");
}

void check_out(std::span<double> out, std::size_t want) {
  if (out.size() != want) throw std::invalid_argument("kernels: output size mismatch");
}

}  // namespace

namespace serial {

void cross(PointSet queries, PointSet points, std::span<const double> w, std::span<double> out) {
  check(queries, points, w);
  const std::size_t nq = queries.size(), np = points.size();
  check_out(out, nq * np);
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j < np; ++j)
      out[i * np + j] = weighted_sq_exp(queries[i], points[j], w.data(), w.size());
}

void gram(PointSet points, std::span<const double> w, std::span<double> out) {
  check(points, points, w);
  const std::size_t n = points.size();
  check_out(out, n * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = weighted_sq_exp(points[i], points[j], w.data(), w.size());
      out[i * n + j] = k;
      out[j * n + i] = k;
    }
  }
}

void predict(PointSet queries, PointSet points, std::span<const double> coef, double bias,
             std::span<const double> w, std::span<double> out) {
  check(queries, points, w);
  if (coef.size() != points.size()) throw std::invalid_argument("kernels: coef size mismatch");
  check_out(out, queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j)
      acc += coef[j] * weighted_sq_exp(queries[i], points[j], w.data(), w.size());
    out[i] = acc + bias;
  }
}

void row_sums(PointSet points, std::span<const double> w, std::span<double> out) {
  check(points, points, w);
  const std::size_t n = points.size();
  check_out(out, n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += weighted_sq_exp(points[i], points[j], w.data(), w.size());
    out[i] = acc;
  }
}

}  // namespace serial

namespace omp {

void cross(PointSet queries, PointSet points, std::span<const double> w, std::span<double> out) {
  check(queries, points, w);
  const auto nq = static_cast<std::int64_t>(queries.size());
  const std::size_t np = points.size();
  check_out(out, queries.size() * np);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nq; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < np; ++j)
      out[r * np + j] = weighted_sq_exp(queries[r], points[j], w.data(), w.size());
  }
}

void gram(PointSet points, std::span<const double> w, std::span<double> out) {
  check(points, points, w);
  const std::size_t n = points.size();
  check_out(out, n * n);
  // (a - b)^2 == (b - a)^2 in IEEE arithmetic, so full rows stay symmetric.
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = r == j ? 1.0 : weighted_sq_exp(points[r], points[j], w.data(), w.size());
  }
}

void predict(PointSet queries, PointSet points, std::span<const double> coef, double bias,
             std::span<const double> w, std::span<double> out) {
  check(queries, points, w);
  if (coef.size() != points.size()) throw std::invalid_argument("kernels: coef size mismatch");
  check_out(out, queries.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(queries.size()); ++i) {
    const auto r = static_cast<std::size_t>(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j)
      acc += coef[j] * weighted_sq_exp(queries[r], points[j], w.data(), w.size());
    out[r] = acc + bias;
  }
}

void row_sums(PointSet points, std::span<const double> w, std::span<double> out) {
  check(points, points, w);
  const std::size_t n = points.size();
  check_out(out, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto r = static_cast<std::size_t>(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += weighted_sq_exp(points[r], points[j], w.data(), w.size());
    out[r] = acc;
  }
}

}  // namespace omp

std::vector<double> cross(PointSet queries, PointSet points, std::span<const double> w) {
  std::vector<double> out(queries.size() * points.size());
  omp::cross(queries, points, w, out);
  return out;
}

std::vector<double> gram(PointSet points, std::span<const double> w) {
  std::vector<double> out(points.size() * points.size());
  omp::gram(points, w, out);
  return out;
}

std::vector<double> predict(PointSet queries, PointSet points, std::span<const double> coef,
                            double bias, std::span<const double> w) {
  std::vector<double> out(queries.size());
  omp::predict(queries, points, coef, bias, w, out);
  return out;
}

std::vector<double> row_sums(PointSet points, std::span<const double> w) {
  std::vector<double> out(points.size());
  omp::row_sums(points, w, out);
  return out;
}

}  // namespace auvlearn::kernels
