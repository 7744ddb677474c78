#include "auvlearn/online_learner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "auvlearn/parallel_kernels.hpp"

namespace auvlearn {

std::string to_string(ForgettingStrategy s) { return s == ForgettingStrategy::kde ? "kde" : "fifo"; }

ForgettingStrategy parse_strategy(const std::string& name) {
  if (name == "kde") return ForgettingStrategy::kde;
  if (name == "fifo") return ForgettingStrategy::fifo;
  throw std::invalid_argument("unknown strategy '" + name + "' (expected kde or fifo)");
}

// ---- PairCache -------------------------------------------------------------

void PairCache::grow(std::size_t min_stride) {
  const std::size_t stride = std::max({min_stride, 2 * stride_, std::size_t{16}});
  std::vector<double> next(stride * stride);
  for (std::size_t i = 0; i < n_; ++i)
    std::copy_n(data_.data() + i * stride_, n_, next.data() + i * stride);
  data_ = std::move(next);
  stride_ = stride;
}

void PairCache::append(std::span<const double> row) {
  if (row.size() != n_ + 1) throw std::invalid_argument("PairCache::append: row size mismatch");
  if (n_ + 1 > stride_) grow(n_ + 1);
  for (std::size_t j = 0; j < n_; ++j) {
    data_[n_ * stride_ + j] = row[j];
    data_[j * stride_ + n_] = row[j];
  }
  data_[n_ * stride_ + n_] = row[n_];
  ++n_;
}

void PairCache::erase(std::span<const std::size_t> sorted_indices) {
  if (sorted_indices.empty()) return;
  std::vector<std::size_t> keep;
  keep.reserve(n_);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (next < sorted_indices.size() && sorted_indices[next] == i) {
      ++next;
      continue;
    }
    keep.push_back(i);
  }
  // Survivors only move towards lower indices, so in-place compaction is safe.
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const double* src = data_.data() + keep[r] * stride_;
    double* dst = data_.data() + r * stride_;
    for (std::size_t c = 0; c < keep.size(); ++c) dst[c] = src[keep[c]];
  }
  n_ = keep.size();
}

void PairCache::assign(std::span<const double> full, std::size_t n) {
  if (full.size() != n * n) throw std::invalid_argument("PairCache::assign: size mismatch");
  n_ = 0;
  if (n > stride_) grow(n);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(full.data() + i * n, n, data_.data() + i * stride_);
  n_ = n;
}

// ---- gate ------------------------------------------------------------------

bool include_gate(const Sample& candidate, std::span<const double> kernel_row, double prediction,
                  const SupportSet& model, const Hyperparams& hp) {
  const bool fits = std::abs(prediction - candidate.y) < hp.epsilon;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double k = kernel_row[i];
    if (k > hp.xi && fits) return false;
    if (k > hp.a && std::abs(candidate.y - model.samples[i].y) < hp.b) return false;
  }
  return true;
}

bool include_gate(const Sample& candidate, const SupportSet& model, const Hyperparams& hp) {
  if (model.empty()) return true;
  std::vector<double> row(model.size());
  double f = model.bias;
  for (std::size_t i = 0; i < model.size(); ++i) {
    row[i] = kernel_eval(candidate.x, model.samples[i].x, model.kernel);
    f += model.weights[i] * row[i];
  }
  return include_gate(candidate, row, f, model, hp);
}

// ---- outlier rejection -----------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty input");
  const double pos = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

IqrFence iqr_fence(std::span<const double> residuals) {
  std::vector<double> s(residuals.begin(), residuals.end());
  std::sort(s.begin(), s.end());
  IqrFence f;
  f.q1 = quantile_sorted(s, 0.25);
  f.q3 = quantile_sorted(s, 0.75);
  const double iqr = f.q3 - f.q1;
  f.lower = f.q1 - 1.5 * iqr;
  f.upper = f.q3 + 1.5 * iqr;
  return f;
}

std::vector<std::size_t> iqr_outliers(std::span<const double> residuals) {
  std::vector<std::size_t> out;
  if (residuals.empty()) return out;
  const IqrFence f = iqr_fence(residuals);
  for (std::size_t i = 0; i < residuals.size(); ++i)
    if (residuals[i] < f.lower || residuals[i] > f.upper) out.push_back(i);
  return out;
}

OutlierResult reject_outliers(SupportSet model) {
  OutlierResult result{std::move(model), {}};
  SupportSet& m = result.model;
  if (m.size() < 4) return result;
  std::vector<double> res(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) res[i] = predict(m, m.samples[i].x) - m.samples[i].y;
  const auto idx = iqr_outliers(res);
  for (std::size_t i : idx) result.removed.push_back(m.samples[i]);
  m.erase(idx);
  return result;
}

// ---- forgetting ------------------------------------------------------------

std::vector<ForgettingScore> forgetting_scores(const SupportSet& model, const Hyperparams& hp,
                                               const BandwidthMatrix& h) {
  std::vector<FeatureVector> inputs;
  inputs.reserve(model.size());
  for (const auto& s : model.samples) inputs.push_back(s.x);
  std::vector<ForgettingScore> out;
  out.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double d = kde_density(model.samples[i].x, inputs, h);
    out.push_back({i, d, d / (std::sqrt(model.samples[i].t) + hp.k)});
  }
  return out;
}

std::vector<std::size_t> kde_forgetting_order(const PairCache& kde, std::span<const double> timestamps,
                                              double k, double det_h, std::size_t keep) {
  const std::size_t n = kde.size();
  if (timestamps.size() != n) throw std::invalid_argument("kde_forgetting_order: size mismatch");
  std::vector<std::size_t> order;
  if (n <= keep) return order;
  std::vector<char> alive(n, 1);
  std::vector<double> age(n);
  for (std::size_t i = 0; i < n; ++i) age[i] = std::sqrt(timestamps[i]) + k;
  std::size_t remaining = n;
  while (remaining > keep) {
    const double norm = static_cast<double>(remaining) * det_h;
    std::size_t best = n;
    double best_phi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      const auto row = kde.row(i);
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (alive[j]) sum += row[j];
      const double phi = (sum / norm) / age[i];
      if (best == n || phi > best_phi) {
        best = i;
        best_phi = phi;
      }
    }
    alive[best] = 0;
    order.push_back(best);
    --remaining;
  }
  return order;
}

std::vector<std::size_t> fifo_forgetting_order(std::span<const double> timestamps, std::size_t keep) {
  std::vector<std::size_t> idx(timestamps.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (idx.size() <= keep) return {};
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });
  idx.resize(idx.size() - keep);
  return idx;
}

namespace {

std::vector<double> timestamps_of(const SupportSet& model) {
  std::vector<double> t;
  t.reserve(model.size());
  for (const auto& s : model.samples) t.push_back(s.t);
  return t;
}

std::vector<std::size_t> sorted_copy(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

SupportSet forget(SupportSet model, const Hyperparams& hp, const BandwidthMatrix& h) {
  if (model.size() <= model.capacity) return model;
  const std::vector<double> flat = model.flat_inputs();
  PairCache kde;
  kde.assign(kernels::gram(PointSet{flat, model.kernel.dim()}, h.inv_sq_widths()), model.size());
  const auto order = kde_forgetting_order(kde, timestamps_of(model), hp.k, h.det(), model.capacity);
  model.erase(sorted_copy(order));
  return model;
}

SupportSet fifo_forget(SupportSet model, const Hyperparams&) {
  const auto order = fifo_forgetting_order(timestamps_of(model), model.capacity);
  model.erase(sorted_copy(order));
  return model;
}

// ---- OnlineLearner ---------------------------------------------------------

OnlineLearner::OnlineLearner(Hyperparams hp, KernelParams kernel, LearnerOptions options)
    : hp_(hp), options_(options), model_(kernel.with_gamma(hp.gamma), hp.buffer_size) {
  hp_.validate();
}

OnlineLearner::OnlineLearner(SupportSet model, Hyperparams hp, LearnerOptions options)
    : hp_(hp), options_(options), model_(std::move(model)) {
  hp_.validate();
  if (model_.weights.size() != model_.samples.size())
    throw std::invalid_argument("OnlineLearner: weights/samples size mismatch");
  const std::vector<double> flat = model_.flat_inputs();
  gram_.assign(kernels::gram(PointSet{flat, model_.kernel.dim()}, model_.kernel.weights()),
               model_.size());
}

std::vector<double> OnlineLearner::buffer_kernel_row(std::span<const double> x) const {
  const auto w = model_.kernel.weights();
  std::vector<double> row(model_.size());
  for (std::size_t i = 0; i < model_.size(); ++i)
    row[i] = weighted_sq_exp(x.data(), model_.samples[i].x.data(), w.data(), w.size());
  return row;
}

void OnlineLearner::erase(std::span<const std::size_t> sorted_indices) {
  if (sorted_indices.empty()) return;
  model_.erase(sorted_indices);
  gram_.erase(sorted_indices);
  if (bandwidth_) kde_.erase(sorted_indices);
}

void OnlineLearner::refit_bandwidth() {
  const std::vector<double> flat = model_.flat_inputs();
  const PointSet pts{flat, model_.kernel.dim()};
  bandwidth_ = fit_bandwidth(pts, hp_.kde_scale);
  kde_.assign(kernels::gram(pts, bandwidth_->inv_sq_widths()), model_.size());
  last_refit_step_ = steps_;
}

PipelineReport OnlineLearner::step(const Sample& incoming, ForgettingStrategy strategy) {
  if (incoming.x.size() != model_.kernel.dim())
    throw std::invalid_argument("OnlineLearner::step: feature dimension mismatch");
  if (!std::isfinite(incoming.y) || !std::isfinite(incoming.t) || incoming.t < 0.0)
    throw std::invalid_argument("OnlineLearner::step: bad target or timestamp");
  for (double v : incoming.x)
    if (!std::isfinite(v)) throw std::invalid_argument("OnlineLearner::step: non-finite feature");

  ++steps_;
  PipelineReport report;
  if (strategy == ForgettingStrategy::fifo && bandwidth_) {
    bandwidth_.reset();
    kde_.clear();
  }

  // Include gate.
  std::vector<double> row = buffer_kernel_row(incoming.x);
  if (!model_.empty()) {
    double f = model_.bias;
    for (std::size_t i = 0; i < row.size(); ++i) f += model_.weights[i] * row[i];
    if (!include_gate(incoming, row, f, model_, hp_)) {
      report.buffer_size_after = model_.size();
      return report;
    }
  }
  report.admitted = true;

  // Sample collector.
  row.push_back(1.0);
  gram_.append(row);
  if (bandwidth_) {
    const auto w = bandwidth_->inv_sq_widths();
    std::vector<double> krow(model_.size() + 1, 1.0);
    for (std::size_t i = 0; i < model_.size(); ++i)
      krow[i] = weighted_sq_exp(incoming.x.data(), model_.samples[i].x.data(), w.data(), w.size());
    kde_.append(krow);
  }
  model_.samples.push_back(incoming);
  model_.weights.push_back(0.0);

  // Training, warm-started from the current weights.
  resolve(report);
  report.trained = true;

  // Only support vectors stay in the buffer. An all-zero solution (always the
  // case for a single sample) keeps the buffer, otherwise it could never grow.
  std::vector<std::size_t> zero;
  for (std::size_t i = 0; i < model_.size(); ++i)
    if (std::abs(model_.weights[i]) <= 1e-12) zero.push_back(i);
  if (zero.size() < model_.size()) erase(zero);

  // Outlier rejection on the support-vector residuals.
  if (model_.size() >= options_.min_outlier_set) {
    std::vector<double> res(model_.size());
    for (std::size_t i = 0; i < model_.size(); ++i) {
      const auto g = gram_.row(i);
      double f = model_.bias;
      for (std::size_t j = 0; j < model_.size(); ++j) f += model_.weights[j] * g[j];
      res[i] = f - model_.samples[i].y;
    }
    const IqrFence fence = iqr_fence(res);
    std::vector<std::size_t> out;
    report.survivor_residual_min = std::numeric_limits<double>::infinity();
    report.survivor_residual_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < res.size(); ++i) {
      if (res[i] < fence.lower || res[i] > fence.upper) {
        out.push_back(i);
      } else {
        report.survivor_residual_min = std::min(report.survivor_residual_min, res[i]);
        report.survivor_residual_max = std::max(report.survivor_residual_max, res[i]);
      }
    }
    report.fence = fence;
    report.outliers_removed = out.size();
    erase(out);
  }

  // Forgetting.
  const std::size_t before = model_.size();
  if (strategy == ForgettingStrategy::kde) {
    if (model_.size() >= 2 &&
        (!bandwidth_ || steps_ - last_refit_step_ >= options_.bandwidth_refit_every))
      refit_bandwidth();
    if (model_.size() > model_.capacity) {
      const auto order = kde_forgetting_order(kde_, timestamps_of(model_), hp_.k,
                                              bandwidth_->det(), model_.capacity);
      erase(sorted_copy(order));
    }
  } else if (model_.size() > model_.capacity) {
    erase(sorted_copy(fifo_forgetting_order(timestamps_of(model_), model_.capacity)));
  }
  report.forgotten = before - model_.size();

  // Removed support vectors leave the remaining weights unbalanced; with wide
  // kernels the predictions are then far off until the next admitted sample.
  if (options_.resolve_after_removal && report.outliers_removed + report.forgotten > 0 && !model_.empty())
    resolve(report);
  report.buffer_size_after = model_.size();
  return report;
}

void OnlineLearner::resolve(PipelineReport& report) {
  SvrSolution warm;
  warm.alphas.resize(model_.size());
  warm.betas.resize(model_.size());
  for (std::size_t i = 0; i < model_.size(); ++i) {
    warm.alphas[i] = std::max(model_.weights[i], 0.0);
    warm.betas[i] = std::max(-model_.weights[i], 0.0);
  }
  std::vector<double> targets(model_.size());
  for (std::size_t i = 0; i < model_.size(); ++i) targets[i] = model_.samples[i].y;
  const StridedKernelView view(gram_.data(), gram_.size(), gram_.stride());
  const SvrSolution sol = solve_dual(view, targets, hp_.epsilon, hp_.cost, warm, options_.solver);
  model_.weights = sol.weights();
  model_.bias = sol.bias;
  report.converged = report.converged && sol.converged;
  report.solver_iterations += sol.iterations;
}

// ---- LearnerBank -----------------------------------------------------------

LearnerBank::LearnerBank(std::span<const double> feature_variances,
                         const std::array<Hyperparams, kDofs>& hps, LearnerOptions options) {
  learners_.reserve(kDofs);
  for (std::size_t d = 0; d < kDofs; ++d) {
    KernelParams kp({feature_variances.begin(), feature_variances.end()}, hps[d].gamma);
    learners_.emplace_back(hps[d], std::move(kp), options);
  }
}

std::array<PipelineReport, kDofs> LearnerBank::step(std::span<const double> features,
                                                    std::span<const double> targets, double t,
                                                    ForgettingStrategy strategy) {
  if (targets.size() != kDofs) throw std::invalid_argument("LearnerBank::step: need 3 targets");
  std::array<PipelineReport, kDofs> reports;
  std::array<std::exception_ptr, kDofs> errors;
#pragma omp parallel for schedule(static, 1)
  for (int d = 0; d < static_cast<int>(kDofs); ++d) {
    try {
      const auto u = static_cast<std::size_t>(d);
      Sample s{{features.begin(), features.end()}, targets[u], t};
      reports[u] = learners_[u].step(s, strategy);
    } catch (...) {
      errors[static_cast<std::size_t>(d)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reports;
}

std::array<PipelineReport, kDofs> multi_dof_step(LearnerBank& bank, std::span<const double> features,
                                                 std::span<const double> targets, double t,
                                                 ForgettingStrategy strategy) {
  return bank.step(features, targets, t, strategy);
}

}  // namespace auvlearn
