#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "auvlearn/auv_dynamics.hpp"
#include "auvlearn/online_learner.hpp"
#include "auvlearn/svr.hpp"

namespace auvlearn {

using DofHyperparams = std::array<Hyperparams, kDofs>;

class UndefinedScore : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Coefficient of determination 1 - SS_res / SS_tot. Throws UndefinedScore
/// when the truth vector is constant.
double r2_score(std::span<const double> predicted, std::span<const double> truth);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t shuffle_seed = 0;
};

struct DatasetSplit {
  Dataset train;                       // time-ordered
  std::map<int, Dataset> validation;   // per configuration label
};

/// Per configuration, a uniformly random 20% (by default) goes to validation;
/// the rest stays in the train stream in its original order.
DatasetSplit stratified_split(const Dataset& data, const SplitSpec& spec);

/// Configuration labels in order of first appearance.
std::vector<int> config_sequence(const Dataset& data);

Dataset rows_with_config(const Dataset& data, int config);

/// Diagonal of the feature covariance of `rows`; the kernel's fixed scaling.
/// A feature that is constant in `rows` gets 1 (left unscaled).
std::vector<double> calibrate_feature_scales(const Dataset& rows);

// ---- offline baselines -----------------------------------------------------

struct BaselineCell {
  std::array<double, kDofs> r2{};
  double mean = 0.0;
};

struct BaselineRow {
  int train_config = 0;
  std::map<int, BaselineCell> scores;  // keyed by validation configuration
  std::array<std::size_t, kDofs> support_vectors{};
  std::array<bool, kDofs> converged{};
};

struct BaselineOptions {
  SolverOptions solver{1e-3, 5'000'000};
};

/// Batch-trains one SVR per output on `train` and scores it on every
/// validation set.
BaselineRow offline_baseline(const Dataset& train, const std::map<int, Dataset>& validation,
                             const DofHyperparams& hps, std::span<const double> feature_scales,
                             const BaselineOptions& options = {});

std::vector<BaselineRow> baseline_matrix(const DatasetSplit& split, const DofHyperparams& hps,
                                         std::span<const double> feature_scales,
                                         const BaselineOptions& options = {});

// ---- online protocol -------------------------------------------------------

struct TraceEntry {
  std::size_t step = 0;
  double time = 0.0;
  int config = 0;
  std::array<double, kDofs> r2{};
  double r2_mean = 0.0;
  std::array<std::size_t, kDofs> buffer{};
  double wall_seconds = 0.0;
};

struct EvalTrace {
  std::vector<TraceEntry> entries;
};

// Header `step,time,config,r2_surge,r2_sway,r2_yaw,r2_mean,buf_surge,buf_sway,buf_yaw`.
void write_trace(std::ostream& out, const EvalTrace& trace);

struct SegmentScore {
  int config = 0;
  std::size_t end_step = 0;
  std::array<double, kDofs> r2{};
  double mean = 0.0;
};

struct OnlineOptions {
  ForgettingStrategy strategy = ForgettingStrategy::kde;
  std::size_t eval_every = 10;
  std::size_t validation_cap = 500;
  std::uint64_t validation_seed = 0;
  LearnerOptions learner{};
  // Called with the finished configuration and the learners just before the
  // stream switches to the next configuration (and at the end of the stream).
  std::function<void(int config, const LearnerBank& bank)> on_segment_end;
};

struct OnlineResult {
  EvalTrace trace;
  std::vector<SegmentScore> segment_scores;  // full validation sets
  std::vector<std::array<PipelineReport, kDofs>> reports;
};

/// Feeds the train stream sample by sample through the learners. After every
/// `eval_every`-th step (the first included) each output is scored on the
/// validation subset of the configuration currently streaming.
OnlineResult online_run(const Dataset& train, const std::map<int, Dataset>& validation,
                        const DofHyperparams& hps, std::span<const double> feature_scales,
                        const OnlineOptions& options);

struct SegmentStats {
  int config = 0;
  std::size_t entries = 0;
  double mean = 0.0;
  double std_dev = 0.0;
};

/// Mean and (population) standard deviation of r2_mean over the last
/// `fraction` of the entries of each contiguous configuration segment.
std::vector<SegmentStats> tail_stats(const EvalTrace& trace, double fraction);

struct StrategyComparison {
  OnlineResult kde;
  OnlineResult fifo;
  std::vector<SegmentStats> kde_stats;   // final third
  std::vector<SegmentStats> fifo_stats;  // final third
  bool forgetting_inactive = false;
};

StrategyComparison compare_strategies(const Dataset& train, const std::map<int, Dataset>& validation,
                                      const DofHyperparams& hps, std::span<const double> feature_scales,
                                      OnlineOptions options);

// ---- hyperparameter search -------------------------------------------------

struct TuneGrid {
  std::vector<double> epsilon{0.001, 0.003, 0.01, 0.03, 0.1};
  std::vector<double> cost{1.0, 10.0, 100.0};
  std::vector<double> gamma{0.3, 1.0, 3.0, 10.0, 20.0, 40.0, 100.0};
  std::size_t max_train = 2000;  // random training subsample, 0 = all
  std::uint64_t seed = 0;
  // Online stage: length of the streamed prefix of the training rows, 0 skips it.
  std::size_t online_steps = 8000;
};

struct TuneRecord {
  std::size_t dof = 0;
  double epsilon = 0.0;
  double cost = 0.0;
  double gamma = 0.0;
  double r2 = 0.0;
};

struct TuneResult {
  DofHyperparams best;
  std::array<double, kDofs> best_r2{};  // offline score of the chosen point
  std::array<double, kDofs> best_online_r2{};  // NaN without the online stage
  std::vector<TuneRecord> records;         // offline grid
  std::vector<TuneRecord> online_records;  // one per (dof, epsilon) candidate
};

/// Grid search per output on one configuration's train/validation data, in two
/// stages. Offline: every (epsilon, C, gamma) is solved on a training
/// subsample and scored on the validation rows. Online: for every (epsilon, C),
/// the best offline gamma is run through the online learner (KDE forgetting)
/// over the first `online_steps` training rows in time order, scored by the
/// mean validation R2 at ten points spread over the last tenth of the stream;
/// the best of these candidates wins. The remaining hyperparameters are taken
/// from `base`.
TuneResult tune(const Dataset& train, const Dataset& validation, const DofHyperparams& base,
                std::span<const double> feature_scales, const TuneGrid& grid,
                const SolverOptions& solver = {1e-3, 5'000'000}, const LearnerOptions& online = {});

}  // namespace auvlearn
