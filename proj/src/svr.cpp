#include "auvlearn/svr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>

#include "auvlearn/parallel_kernels.hpp"
#include "auvlearn/smo_scan.hpp"

namespace auvlearn {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("Hyperparams: " + what);
}

}  // namespace

void Hyperparams::validate() const {
  require(epsilon >= 0.0 && std::isfinite(epsilon), "epsilon must be >= 0");
  require(cost > 0.0 && std::isfinite(cost), "cost must be > 0");
  require(gamma > 0.0 && std::isfinite(gamma), "gamma must be > 0");
  require(buffer_size >= 1, "buffer_size must be >= 1");
  require(k >= 0.0 && std::isfinite(k), "k must be >= 0");
  require(a > 0.0 && a < 1.0, "a must lie in (0, 1)");
  require(b > 0.0 && std::isfinite(b), "b must be > 0");
  require(xi > 0.0 && xi < 1.0, "xi must lie in (0, 1)");
  require(kde_scale > 0.0 && std::isfinite(kde_scale), "kde_scale must be > 0");
}

std::vector<double> SvrSolution::weights() const {
  std::vector<double> w(alphas.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = alphas[i] - betas[i];
  return w;
}

DenseKernelMatrix::DenseKernelMatrix(std::vector<double> data, std::size_t n)
    : data_(std::move(data)), n_(n) {
  if (data_.size() != n * n) throw std::invalid_argument("DenseKernelMatrix: size mismatch");
}

CachedKernelMatrix::CachedKernelMatrix(PointSet points, const KernelParams& kernel,
                                       std::size_t cache_megabytes)
    : points_(points.data.begin(), points.data.end()),
      dim_(points.dim),
      n_(points.size()),
      weights_(kernel.weights().begin(), kernel.weights().end()) {
  if (dim_ != kernel.dim()) throw std::invalid_argument("CachedKernelMatrix: dimension mismatch");
  const std::size_t row_bytes = std::max<std::size_t>(n_, 1) * sizeof(double);
  max_rows_ = std::clamp<std::size_t>(cache_megabytes * 1024 * 1024 / row_bytes, 2, std::max<std::size_t>(n_, 2));
  slot_of_.assign(n_, -1);
  // Rows handed out as spans must survive later cache growth.
  storage_.reserve(max_rows_ * n_);
}

std::span<const double> CachedKernelMatrix::row(std::size_t i) const {
  if (slot_of_[i] >= 0) {
    const auto slot = static_cast<std::size_t>(slot_of_[i]);
    lru_.splice(lru_.begin(), lru_, lru_pos_[slot]);
    return {storage_.data() + slot * n_, n_};
  }
  ++misses_;
  std::size_t slot;
  if (owner_.size() < max_rows_) {
    slot = owner_.size();
    owner_.push_back(i);
    storage_.resize(owner_.size() * n_);
    lru_.push_front(slot);
    lru_pos_.push_back(lru_.begin());
  } else {
    slot = lru_.back();
    slot_of_[owner_[slot]] = -1;
    owner_[slot] = i;
    lru_.splice(lru_.begin(), lru_, lru_pos_[slot]);
  }
  slot_of_[i] = static_cast<long>(slot);
  double* out = storage_.data() + slot * n_;
  const PointSet pts{points_, dim_};
  const double* xi = pts[i];
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(n_); ++j)
    out[j] = weighted_sq_exp(xi, pts[static_cast<std::size_t>(j)], weights_.data(), dim_);
  return {out, n_};
}

namespace {

std::mutex observer_mutex;
SolveObserver observer;

void notify_observer(const SvrSolution& sol, double cost) {
  std::lock_guard lock(observer_mutex);
  if (observer) observer(sol, cost);
}

}  // namespace

void set_solve_observer(SolveObserver fn) {
  std::lock_guard lock(observer_mutex);
  observer = std::move(fn);
}

SvrSolution solve_dual(const KernelMatrix& kernel, std::span<const double> targets, double epsilon,
                       double cost, const std::optional<SvrSolution>& warm_start,
                       const SolverOptions& options) {
  const std::size_t n = kernel.size();
  if (n == 0) throw std::invalid_argument("solve_dual: no samples");
  if (targets.size() != n) throw std::invalid_argument("solve_dual: target count mismatch");
  if (!(cost > 0.0) || !(epsilon >= 0.0)) throw std::invalid_argument("solve_dual: bad eps/C");

  // Variables 0..n-1 are alpha (sign +1), n..2n-1 are beta (sign -1).
  const std::size_t l = 2 * n;
  std::vector<double> a(l, 0.0), p(l), grad(l);
  for (std::size_t k = 0; k < n; ++k) {
    p[k] = epsilon - targets[k];
    p[k + n] = epsilon + targets[k];
  }

  if (warm_start) {
    const std::size_t m = warm_start->alphas.size();
    if (m > n || warm_start->betas.size() != m)
      throw std::invalid_argument("solve_dual: warm start longer than sample set");
    double pos = 0.0, neg = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double w = warm_start->alphas[k] - warm_start->betas[k];
      if (w > 0.0) {
        a[k] = std::min(w, cost);
        pos += a[k];
      } else if (w < 0.0) {
        a[k + n] = std::min(-w, cost);
        neg += a[k + n];
      }
    }
    if (pos > neg) {
      const double f = neg / pos;
      for (std::size_t k = 0; k < m; ++k) a[k] *= f;
    } else if (neg > pos) {
      const double f = pos / neg;
      for (std::size_t k = 0; k < m; ++k) a[k + n] *= f;
    }
  }

  grad = p;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = a[k] - a[k + n];
    if (w == 0.0) continue;
    const auto row = kernel.row(k);
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += row[t] * w;
      grad[t + n] -= row[t] * w;
    }
  }

  auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
  auto sample = [n](std::size_t t) { return t < n ? t : t - n; };
  std::vector<double> qd(n);
  for (std::size_t k = 0; k < n; ++k) qd[k] = kernel.diag(k);
  const smo::DualState state{grad.data(), a.data(), qd.data(), n, cost};

  SvrSolution sol;
  sol.converged = false;
  std::size_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const auto [gmax, i] = smo::select_up(state);
    if (i == l) {
      sol.converged = true;
      sol.max_violation = 0.0;
      break;
    }
    const std::size_t ki = sample(i);
    const auto row_i = kernel.row(ki);
    const double qd_i = qd[ki];

    const auto [gap, j] = smo::select_low(state, gmax, row_i.data(), qd_i);
    sol.max_violation = gap;
    if (gap < options.tolerance || j == l) {
      sol.converged = true;
      break;
    }

    const std::size_t kj = sample(j);
    const double si = sign(i), sj = sign(j);
    const double kij = row_i[kj];
    const double old_ai = a[i], old_aj = a[j];
    double quad = qd_i + qd[kj] - 2.0 * kij;
    if (quad <= 0.0) quad = kTau;
    if (si != sj) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > cost) {
          a[i] = cost;
          a[j] = cost - diff;
        }
      } else if (a[j] > cost) {
        a[j] = cost;
        a[i] = cost + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > cost) {
        if (a[i] > cost) {
          a[i] = cost;
          a[j] = sum - cost;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > cost) {
        if (a[j] > cost) {
          a[j] = cost;
          a[i] = sum - cost;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    const double di = (a[i] - old_ai) * si;
    const double dj = (a[j] - old_aj) * sj;
    const auto row_j = kernel.row(kj);
    for (std::size_t t = 0; t < n; ++t) {
      const double u = row_i[t] * di + row_j[t] * dj;
      grad[t] += u;
      grad[t + n] -= u;
    }
  }
  sol.iterations = iter;

  // Both sides of one sample active only lowers the objective by 2*eps*min;
  // cancelling the overlap leaves the weight, and hence the gradient, intact.
  for (std::size_t k = 0; k < n; ++k) {
    const double m = std::min(a[k], a[k + n]);
    if (m > 0.0) {
      a[k] -= m;
      a[k + n] -= m;
    }
  }

  // Bias from the KKT conditions.
  double free_sum = 0.0;
  std::size_t n_free = 0;
  bool all_zero = true;
  double ub = kInf, lb = -kInf;
  for (std::size_t t = 0; t < l; ++t) {
    if (a[t] != 0.0) all_zero = false;
    const double yg = sign(t) * grad[t];
    if (a[t] >= cost) {
      if (t >= n) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (t < n) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++n_free;
    }
  }
  if (all_zero) {
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
    const auto [lo_it, hi_it] = std::minmax_element(targets.begin(), targets.end());
    const double lo = *hi_it - epsilon, hi = *lo_it + epsilon;
    sol.bias = lo <= hi ? std::clamp(mean, lo, hi) : mean;
  } else if (n_free > 0) {
    sol.bias = -free_sum / static_cast<double>(n_free);
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    sol.bias = -(ub + lb) / 2.0;
  } else {
    sol.bias = -(std::isfinite(ub) ? ub : lb);
  }

  double obj = 0.0;
  for (std::size_t t = 0; t < l; ++t) obj += a[t] * (grad[t] + p[t]);
  sol.objective = obj / 2.0;
  sol.alphas.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n));
  sol.betas.assign(a.begin() + static_cast<std::ptrdiff_t>(n), a.end());
  notify_observer(sol, cost);
  return sol;
}

SvrSolution solve_dual(std::span<const Sample> samples, const Hyperparams& hp,
                       const KernelParams& kernel, const std::optional<SvrSolution>& warm_start,
                       const SolverOptions& options) {
  hp.validate();
  if (samples.empty()) throw std::invalid_argument("solve_dual: no samples");
  std::vector<double> flat;
  std::vector<double> targets;
  flat.reserve(samples.size() * kernel.dim());
  for (const auto& s : samples) {
    if (s.x.size() != kernel.dim()) throw std::invalid_argument("solve_dual: dimension mismatch");
    flat.insert(flat.end(), s.x.begin(), s.x.end());
    targets.push_back(s.y);
  }
  const PointSet pts{flat, kernel.dim()};
  const KernelParams kp = kernel.with_gamma(hp.gamma);
  if (samples.size() <= 4000) {
    DenseKernelMatrix gram(kernels::gram(pts, kp.weights()), samples.size());
    return solve_dual(gram, targets, hp.epsilon, hp.cost, warm_start, options);
  }
  CachedKernelMatrix cached(pts, kp);
  return solve_dual(cached, targets, hp.epsilon, hp.cost, warm_start, options);
}

std::vector<double> SupportSet::flat_inputs() const {
  std::vector<double> out;
  out.reserve(samples.size() * kernel.dim());
  for (const auto& s : samples) out.insert(out.end(), s.x.begin(), s.x.end());
  return out;
}

void SupportSet::erase(std::span<const std::size_t> sorted_indices) {
  std::size_t write = 0, next = 0;
  for (std::size_t read = 0; read < samples.size(); ++read) {
    if (next < sorted_indices.size() && sorted_indices[next] == read) {
      ++next;
      continue;
    }
    if (write != read) {
      samples[write] = std::move(samples[read]);
      weights[write] = weights[read];
    }
    ++write;
  }
  samples.resize(write);
  weights.resize(write);
}

SupportSet make_support_set(std::span<const Sample> samples, const SvrSolution& solution,
                            KernelParams kernel, std::size_t capacity) {
  if (solution.alphas.size() != samples.size())
    throw std::invalid_argument("make_support_set: solution/sample size mismatch");
  SupportSet model(std::move(kernel), capacity);
  model.samples.assign(samples.begin(), samples.end());
  model.weights = solution.weights();
  model.bias = solution.bias;
  return model;
}

double predict(const SupportSet& model, std::span<const double> x) {
  if (x.size() != model.kernel.dim()) throw std::invalid_argument("predict: dimension mismatch");
  const auto w = model.kernel.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < model.samples.size(); ++i)
    acc += model.weights[i] * weighted_sq_exp(model.samples[i].x.data(), x.data(), w.data(), w.size());
  return acc + model.bias;
}

std::vector<double> predict(const SupportSet& model, PointSet queries) {
  if (queries.dim != model.kernel.dim()) throw std::invalid_argument("predict: dimension mismatch");
  const std::vector<double> flat = model.flat_inputs();
  return kernels::predict(queries, PointSet{flat, model.kernel.dim()}, model.weights, model.bias,
                          model.kernel.weights());
}

SupportSet prune_weights(SupportSet model, const Hyperparams&) {
  std::vector<std::size_t> zero;
  for (std::size_t i = 0; i < model.weights.size(); ++i)
    if (std::abs(model.weights[i]) <= 1e-12) zero.push_back(i);
  model.erase(zero);
  return model;
}

}  // namespace auvlearn
