#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auvlearn/kernel_density.hpp"
#include "auvlearn/svr.hpp"

namespace auvlearn {

enum class ForgettingStrategy { kde, fifo };

std::string to_string(ForgettingStrategy s);
ForgettingStrategy parse_strategy(const std::string& name);

struct ForgettingScore {
  std::size_t sample_index = 0;
  double density = 0.0;
  double phi = 0.0;  // density / (sqrt(t_s) + k)
};

struct IqrFence {
  double q1 = 0.0;
  double q3 = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  bool operator==(const IqrFence&) const = default;
};

struct PipelineReport {
  bool admitted = false;
  bool trained = false;
  bool converged = true;
  std::size_t outliers_removed = 0;
  std::size_t forgotten = 0;
  std::size_t buffer_size_after = 0;
  std::size_t solver_iterations = 0;
  // Set when outlier rejection ran: the fence over the pre-removal residuals
  // and the range of the residuals that survived it.
  std::optional<IqrFence> fence;
  double survivor_residual_min = 0.0;
  double survivor_residual_max = 0.0;

  bool operator==(const PipelineReport&) const = default;
};

/// Symmetric matrix over the current buffer, grown one row at a time and
/// compacted on deletion.
class PairCache {
 public:
  std::size_t size() const { return n_; }
  std::size_t stride() const { return stride_; }
  const double* data() const { return data_.data(); }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * stride_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * stride_, n_}; }

  // `row` holds the new point's values against the existing n points, then its diagonal.
  void append(std::span<const double> row);
  void erase(std::span<const std::size_t> sorted_indices);
  void assign(std::span<const double> full, std::size_t n);
  void clear() { n_ = 0; }

 private:
  void grow(std::size_t min_stride);

  std::vector<double> data_;
  std::size_t n_ = 0;
  std::size_t stride_ = 0;
};

// ---- pipeline nodes as standalone operations -------------------------------

/// True when the candidate should be trained on. It is discarded when some
/// support vector lies within kernel proximity xi while the model already fits
/// the candidate inside the tube, or within proximity a while its target is
/// within b of the candidate's.
bool include_gate(const Sample& candidate, const SupportSet& model, const Hyperparams& hp);

// Same test with the kernel row and prediction precomputed.
bool include_gate(const Sample& candidate, std::span<const double> kernel_row, double prediction,
                  const SupportSet& model, const Hyperparams& hp);

/// Quartile by linear interpolation at position (n - 1) * p of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

IqrFence iqr_fence(std::span<const double> residuals);

/// Indices (ascending) of residuals outside the closed 1.5 IQR fence.
std::vector<std::size_t> iqr_outliers(std::span<const double> residuals);

struct OutlierResult {
  SupportSet model;
  std::vector<Sample> removed;
};

/// Removes support vectors whose residual f(x_i) - y_i falls outside the IQR
/// fence. Sets with fewer than four support vectors are left alone.
OutlierResult reject_outliers(SupportSet model);

std::vector<ForgettingScore> forgetting_scores(const SupportSet& model, const Hyperparams& hp,
                                               const BandwidthMatrix& h);

/// Indices to remove, in removal order, until `keep` samples remain. `kde` is
/// the buffer's pairwise exp(-|H^-1 (x_i - x_j)|^2) matrix; densities are
/// recomputed over the survivors after every removal and ties go to the lower
/// index.
std::vector<std::size_t> kde_forgetting_order(const PairCache& kde, std::span<const double> timestamps,
                                              double k, double det_h, std::size_t keep);

/// Indices to remove by ascending timestamp, ties by lower index.
std::vector<std::size_t> fifo_forgetting_order(std::span<const double> timestamps, std::size_t keep);

/// Removes highest-phi samples until size <= capacity.
SupportSet forget(SupportSet model, const Hyperparams& hp, const BandwidthMatrix& h);

/// Removes the oldest samples until size <= capacity.
SupportSet fifo_forget(SupportSet model, const Hyperparams& hp);

// ---- the pipeline ----------------------------------------------------------

struct LearnerOptions {
  SolverOptions solver{};
  std::size_t bandwidth_refit_every = 50;
  std::size_t min_outlier_set = 4;
  // Re-solve (warm-started) after outlier rejection or forgetting removed samples.
  bool resolve_after_removal = true;
};

/// One output dimension of the online learner: include gate, sample collector,
/// warm-started training, outlier rejection and forgetting, run in that order
/// on every step. Keeps the buffer's Gram matrix (and, for KDE forgetting, its
/// pairwise KDE kernel matrix) cached across steps.
class OnlineLearner {
 public:
  OnlineLearner(Hyperparams hp, KernelParams kernel, LearnerOptions options = {});

  /// Restores a learner from a saved model; caches are rebuilt.
  OnlineLearner(SupportSet model, Hyperparams hp, LearnerOptions options = {});

  PipelineReport step(const Sample& incoming, ForgettingStrategy strategy);

  const SupportSet& model() const { return model_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const std::optional<BandwidthMatrix>& bandwidth() const { return bandwidth_; }
  std::size_t steps() const { return steps_; }

  double predict(std::span<const double> x) const { return auvlearn::predict(model_, x); }
  std::vector<double> predict(PointSet queries) const { return auvlearn::predict(model_, queries); }

 private:
  std::vector<double> buffer_kernel_row(std::span<const double> x) const;
  void erase(std::span<const std::size_t> sorted_indices);
  void refit_bandwidth();
  void resolve(PipelineReport& report);

  Hyperparams hp_;
  LearnerOptions options_;
  SupportSet model_;
  PairCache gram_;
  PairCache kde_;
  std::optional<BandwidthMatrix> bandwidth_;
  std::size_t steps_ = 0;
  std::size_t last_refit_step_ = 0;
};

inline constexpr std::size_t kDofs = 3;
inline constexpr std::array<const char*, kDofs> kDofNames{"surge", "sway", "yaw"};

/// Three independent learners (surge, sway, yaw) fed the same features.
class LearnerBank {
 public:
  LearnerBank(std::span<const double> feature_variances, const std::array<Hyperparams, kDofs>& hps,
              LearnerOptions options = {});

  std::array<PipelineReport, kDofs> step(std::span<const double> features,
                                         std::span<const double> targets, double t,
                                         ForgettingStrategy strategy);

  const OnlineLearner& operator[](std::size_t dof) const { return learners_[dof]; }
  OnlineLearner& operator[](std::size_t dof) { return learners_[dof]; }

 private:
  std::vector<OnlineLearner> learners_;
};

std::array<PipelineReport, kDofs> multi_dof_step(LearnerBank& bank, std::span<const double> features,
                                                 std::span<const double> targets, double t,
                                                 ForgettingStrategy strategy);

// ---- checkpoints -----------------------------------------------------------

inline constexpr const char* kCheckpointFormat = "auvlearn-checkpoint/1";

struct Checkpoint {
  SupportSet model;
  Hyperparams hp;
};

void save_checkpoint(std::ostream& out, const SupportSet& model, const Hyperparams& hp);
void save_checkpoint(const std::string& path, const SupportSet& model, const Hyperparams& hp);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace auvlearn
