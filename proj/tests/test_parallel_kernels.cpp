#include "doctest.h"

#include "auvlearn/parallel_kernels.hpp"
#include "support/random.hpp"

using namespace auvlearn;

namespace {

std::vector<double> random_flat(gen::Rng& rng, std::size_t n, std::size_t dim) {
  return flatten(gen::points(rng, n, dim), dim);
}

}  // namespace

TEST_CASE("serial cross matches kernel_eval") {
  gen::Rng rng(21);
  const KernelParams p(gen::positive(rng, 6), 2.0);
  const auto q = gen::points(rng, 7, 6), x = gen::points(rng, 9, 6);
  const auto qf = flatten(q, 6), xf = flatten(x, 6);
  std::vector<double> out(63);
  kernels::serial::cross({qf, 6}, {xf, 6}, p.weights(), out);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 9; ++j) CHECK(out[i * 9 + j] == doctest::Approx(kernel_eval(q[i], x[j], p)).epsilon(1e-14));
}

TEST_CASE("OpenMP kernels agree bit for bit with the serial reference") {
  gen::Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = gen::index(rng, 1, 6);
    const std::size_t n = gen::index(rng, 1, 120), m = gen::index(rng, 1, 60);
    const auto w = gen::positive(rng, dim);
    const auto pts = random_flat(rng, n, dim), qs = random_flat(rng, m, dim);
    std::vector<double> coef(n);
    for (auto& c : coef) c = gen::uniform(rng, -1.0, 1.0);

    std::vector<double> a(m * n), b(m * n);
    kernels::serial::cross({qs, dim}, {pts, dim}, w, a);
    kernels::omp::cross({qs, dim}, {pts, dim}, w, b);
    CHECK(a == b);

    std::vector<double> g1(n * n), g2(n * n);
    kernels::serial::gram({pts, dim}, w, g1);
    kernels::omp::gram({pts, dim}, w, g2);
    CHECK(g1 == g2);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(g1[i * n + i] == 1.0);
      for (std::size_t j = 0; j < n; ++j) CHECK(g1[i * n + j] == g1[j * n + i]);
    }

    std::vector<double> p1(m), p2(m);
    kernels::serial::predict({qs, dim}, {pts, dim}, coef, 0.25, w, p1);
    kernels::omp::predict({qs, dim}, {pts, dim}, coef, 0.25, w, p2);
    CHECK(p1 == p2);

    std::vector<double> r1(n), r2(n);
    kernels::serial::row_sums({pts, dim}, w, r1);
    kernels::omp::row_sums({pts, dim}, w, r2);
    CHECK(r1 == r2);
  }
}

TEST_CASE("predict equals the weighted cross-kernel sum") {
  gen::Rng rng(23);
  const auto w = gen::positive(rng, 3);
  const auto pts = random_flat(rng, 15, 3), qs = random_flat(rng, 5, 3);
  std::vector<double> coef(15);
  for (auto& c : coef) c = gen::uniform(rng, -2.0, 2.0);
  const auto k = kernels::cross({qs, 3}, {pts, 3}, w);
  const auto p = kernels::predict({qs, 3}, {pts, 3}, coef, -0.5, w);
  for (std::size_t i = 0; i < 5; ++i) {
    double f = -0.5;
    for (std::size_t j = 0; j < 15; ++j) f += coef[j] * k[i * 15 + j];
    CHECK(p[i] == doctest::Approx(f).epsilon(1e-13));
  }
}
