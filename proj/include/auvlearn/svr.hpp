#pragma once

#include <cstddef>
#include <functional>
#include <list>
#include <optional>
#include <span>
#include <vector>

#include "auvlearn/kernel_density.hpp"

namespace auvlearn {

/// One regression sample: features, scalar target, acquisition time in
/// seconds since the start of the stream.
struct Sample {
  FeatureVector x;
  double y = 0.0;
  double t = 0.0;
};

/// Per-output tuning record.
struct Hyperparams {
  double epsilon = 0.01;       // tube half-width, target units
  double cost = 10.0;          // box constraint C
  double gamma = 20.0;         // kernel sharpness
  std::size_t buffer_size = 900;
  double k = 10.0;             // forgetting age weight, s^0.5
  double a = 0.99;             // gate: kernel proximity for the target test
  double b = 1e-2;             // gate: target proximity, target units
  double xi = 0.99;            // gate: kernel proximity for the fit test
  double kde_scale = 0.5;      // bandwidth multiplier h

  /// Throws std::invalid_argument naming the first violated bound.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

struct SolverOptions {
  double tolerance = 1e-3;              // max KKT violation m(a) - M(a)
  std::size_t max_iterations = 100000;  // SMO pair updates
};

/// Dual solution of the epsilon-SVR problem.
struct SvrSolution {
  std::vector<double> alphas;
  std::vector<double> betas;
  double bias = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  double max_violation = 0.0;
  bool converged = true;

  std::vector<double> weights() const;
};

/// Row access to a symmetric kernel matrix. Spans returned by row() stay valid
/// at least until two further row() calls have been made.
class KernelMatrix {
 public:
  virtual ~KernelMatrix() = default;
  virtual std::size_t size() const = 0;
  virtual std::span<const double> row(std::size_t i) const = 0;
  virtual double diag(std::size_t i) const = 0;
};

/// Fully materialized n x n matrix, row-major with an arbitrary row stride.
class DenseKernelMatrix final : public KernelMatrix {
 public:
  DenseKernelMatrix(std::vector<double> data, std::size_t n);
  std::size_t size() const override { return n_; }
  std::span<const double> row(std::size_t i) const override { return {data_.data() + i * n_, n_}; }
  double diag(std::size_t i) const override { return data_[i * n_ + i]; }

 private:
  std::vector<double> data_;
  std::size_t n_;
};

/// Non-owning view of a strided matrix (the learner's Gram cache).
class StridedKernelView final : public KernelMatrix {
 public:
  StridedKernelView(const double* data, std::size_t n, std::size_t stride)
      : data_(data), n_(n), stride_(stride) {}
  std::size_t size() const override { return n_; }
  std::span<const double> row(std::size_t i) const override { return {data_ + i * stride_, n_}; }
  double diag(std::size_t i) const override { return data_[i * stride_ + i]; }

 private:
  const double* data_;
  std::size_t n_;
  std::size_t stride_;
};

/// Kernel rows computed on demand and kept in an LRU cache, for training sets
/// too large to materialize.
class CachedKernelMatrix final : public KernelMatrix {
 public:
  CachedKernelMatrix(PointSet points, const KernelParams& kernel, std::size_t cache_megabytes = 256);
  std::size_t size() const override { return n_; }
  std::span<const double> row(std::size_t i) const override;
  double diag(std::size_t) const override { return 1.0; }

  std::size_t misses() const { return misses_; }

 private:
  std::vector<double> points_;
  std::size_t dim_;
  std::size_t n_;
  std::vector<double> weights_;
  std::size_t max_rows_;

  mutable std::vector<double> storage_;
  mutable std::vector<long> slot_of_;  // -1 when not cached
  mutable std::vector<std::size_t> owner_;
  mutable std::list<std::size_t> lru_;  // slots, most recent first
  mutable std::vector<std::list<std::size_t>::iterator> lru_pos_;
  mutable std::size_t misses_ = 0;
};

/// Solves min 1/2 (a-b)' K (a-b) + eps sum(a+b) - y'(a-b)
///        s.t. 0 <= a_i, b_i <= C, sum(a-b) = 0
/// by SMO with second-order working-pair selection.
///
/// A warm start may cover a prefix of the samples; the rest start at zero. Its
/// weights are split by sign, clipped to the box and, when their sum is not
/// zero, the surplus side is scaled down so the start is feasible. Hitting the
/// iteration cap returns the current iterate with `converged == false`.
SvrSolution solve_dual(const KernelMatrix& kernel, std::span<const double> targets, double epsilon,
                       double cost, const std::optional<SvrSolution>& warm_start = std::nullopt,
                       const SolverOptions& options = {});

/// Called after every solve_dual with the solution and its C. Meant for test
/// instrumentation; pass an empty function to remove it.
using SolveObserver = std::function<void(const SvrSolution&, double cost)>;
void set_solve_observer(SolveObserver observer);

// `kernel` supplies the feature scales; hp.gamma sets the sharpness.
SvrSolution solve_dual(std::span<const Sample> samples, const Hyperparams& hp,
                       const KernelParams& kernel,
                       const std::optional<SvrSolution>& warm_start = std::nullopt,
                       const SolverOptions& options = {});

/// Support-vector buffer and weights of one output dimension.
struct SupportSet {
  std::vector<Sample> samples;
  std::vector<double> weights;  // alpha - beta
  double bias = 0.0;
  KernelParams kernel;
  std::size_t capacity = 900;

  explicit SupportSet(KernelParams kp, std::size_t cap = 900) : kernel(std::move(kp)), capacity(cap) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<double> flat_inputs() const;
  void erase(std::span<const std::size_t> sorted_indices);
};

SupportSet make_support_set(std::span<const Sample> samples, const SvrSolution& solution,
                            KernelParams kernel, std::size_t capacity);

/// sum_i w_i k(x_i, x) + bias.
double predict(const SupportSet& model, std::span<const double> x);
std::vector<double> predict(const SupportSet& model, PointSet queries);

/// Drops samples whose |weight| <= 1e-12; they do not contribute to predictions.
SupportSet prune_weights(SupportSet model, const Hyperparams& hp);

}  // namespace auvlearn
