#include "auvlearn/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "auvlearn/parallel_kernels.hpp"

namespace auvlearn {

double r2_score(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw std::invalid_argument("r2_score: need equal, nonzero lengths");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
    ss_tot += (mean - truth[i]) * (mean - truth[i]);
  }
  if (ss_tot == 0.0) throw UndefinedScore("r2_score: constant truth vector");
  return 1.0 - ss_res / ss_tot;
}

std::vector<int> config_sequence(const Dataset& data) {
  std::vector<int> seq;
  for (const auto& r : data)
    if (std::find(seq.begin(), seq.end(), r.config) == seq.end()) seq.push_back(r.config);
  return seq;
}

Dataset rows_with_config(const Dataset& data, int config) {
  Dataset out;
  for (const auto& r : data)
    if (r.config == config) out.push_back(r);
  return out;
}

DatasetSplit stratified_split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("stratified_split: train_fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_config;
  for (std::size_t i = 0; i < data.size(); ++i) by_config[data[i].config].push_back(i);

  std::vector<char> is_validation(data.size(), 0);
  DatasetSplit split;
  std::mt19937_64 rng(spec.shuffle_seed);
  for (auto& [config, idx] : by_config) {
    if (idx.size() < 5)
      throw std::invalid_argument(fmt::format("stratified_split: configuration {} has only {} samples",
                                              config, idx.size()));
    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    std::vector<std::size_t> shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::vector<std::size_t> val(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    std::sort(val.begin(), val.end());
    Dataset& vset = split.validation[config];
    for (std::size_t i : val) {
      is_validation[i] = 1;
      vset.push_back(data[i]);
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!is_validation[i]) split.train.push_back(data[i]);
  return split;
}

std::vector<double> calibrate_feature_scales(const Dataset& rows) {
  std::vector<double> flat;
  flat.reserve(rows.size() * 6);
  for (const auto& r : rows) {
    const auto f = r.features();
    flat.insert(flat.end(), f.begin(), f.end());
  }
  std::vector<double> v = feature_variances(PointSet{flat, 6});
  for (double& x : v)
    if (!(x > 0.0)) x = 1.0;
  return v;
}

namespace {

struct FlatSet {
  std::vector<double> x;  // row-major, 6 features
  std::array<std::vector<double>, kDofs> y;

  PointSet points() const { return {x, 6}; }
  std::size_t size() const { return x.size() / 6; }
};

FlatSet flatten_rows(const Dataset& rows) {
  FlatSet s;
  s.x.reserve(rows.size() * 6);
  for (const auto& r : rows) {
    const auto f = r.features();
    s.x.insert(s.x.end(), f.begin(), f.end());
    for (std::size_t d = 0; d < kDofs; ++d) s.y[d].push_back(r.accel[d]);
  }
  return s;
}

FlatSet subsample(const Dataset& rows, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || rows.size() <= cap) return flatten_rows(rows);
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  Dataset picked;
  picked.reserve(cap);
  for (std::size_t i : idx) picked.push_back(rows[i]);
  return flatten_rows(picked);
}

std::vector<double> pick(std::span<const double> w, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(w[i]);
  return out;
}

}  // namespace

// ---- offline baselines -----------------------------------------------------

BaselineRow offline_baseline(const Dataset& train, const std::map<int, Dataset>& validation,
                             const DofHyperparams& hps, std::span<const double> feature_scales,
                             const BaselineOptions& options) {
  if (train.empty()) throw std::invalid_argument("offline_baseline: empty training set");
  BaselineRow row;
  row.train_config = train.front().config;
  const FlatSet tr = flatten_rows(train);
  std::map<int, FlatSet> val;
  for (const auto& [c, rows] : validation) val.emplace(c, flatten_rows(rows));

  for (std::size_t d = 0; d < kDofs; ++d) {
    const KernelParams kp({feature_scales.begin(), feature_scales.end()}, hps[d].gamma);
    SvrSolution sol;
    if (tr.size() <= 6000) {
      const DenseKernelMatrix gram(kernels::gram(tr.points(), kp.weights()), tr.size());
      sol = solve_dual(gram, tr.y[d], hps[d].epsilon, hps[d].cost, std::nullopt, options.solver);
    } else {
      const CachedKernelMatrix cached(tr.points(), kp, 768);
      sol = solve_dual(cached, tr.y[d], hps[d].epsilon, hps[d].cost, std::nullopt, options.solver);
    }
    row.converged[d] = sol.converged;
    const std::vector<double> w = sol.weights();
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (std::abs(w[i]) > 1e-12) sv.push_back(i);
    row.support_vectors[d] = sv.size();
    std::vector<double> sv_x;
    sv_x.reserve(sv.size() * 6);
    for (std::size_t i : sv) sv_x.insert(sv_x.end(), tr.x.begin() + static_cast<std::ptrdiff_t>(i * 6),
                                         tr.x.begin() + static_cast<std::ptrdiff_t>(i * 6 + 6));
    const std::vector<double> coef = pick(w, sv);
    for (const auto& [c, vs] : val) {
      const auto pred = kernels::predict(vs.points(), PointSet{sv_x, 6}, coef, sol.bias, kp.weights());
      row.scores[c].r2[d] = r2_score(pred, vs.y[d]);
    }
  }
  for (auto& [c, cell] : row.scores)
    cell.mean = (cell.r2[0] + cell.r2[1] + cell.r2[2]) / static_cast<double>(kDofs);
  return row;
}

std::vector<BaselineRow> baseline_matrix(const DatasetSplit& split, const DofHyperparams& hps,
                                         std::span<const double> feature_scales,
                                         const BaselineOptions& options) {
  std::vector<BaselineRow> rows;
  for (int c : config_sequence(split.train))
    rows.push_back(offline_baseline(rows_with_config(split.train, c), split.validation, hps,
                                    feature_scales, options));
  return rows;
}

// ---- online protocol -------------------------------------------------------

void write_trace(std::ostream& out, const EvalTrace& trace) {
  out << "step,time,config,r2_surge,r2_sway,r2_yaw,r2_mean,buf_surge,buf_sway,buf_yaw\n";
  for (const auto& e : trace.entries) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", e.step, e.time, e.config, e.r2[0], e.r2[1],
                       e.r2[2], e.r2_mean, e.buffer[0], e.buffer[1], e.buffer[2]);
  }
}

namespace {

std::array<double, kDofs> score_bank(const LearnerBank& bank, const FlatSet& set) {
  std::array<double, kDofs> r2{};
  for (std::size_t d = 0; d < kDofs; ++d) r2[d] = r2_score(bank[d].predict(set.points()), set.y[d]);
  return r2;
}

double mean3(const std::array<double, kDofs>& v) { return (v[0] + v[1] + v[2]) / 3.0; }

}  // namespace

OnlineResult online_run(const Dataset& train, const std::map<int, Dataset>& validation,
                        const DofHyperparams& hps, std::span<const double> feature_scales,
                        const OnlineOptions& options) {
  if (train.empty()) throw std::invalid_argument("online_run: empty train stream");
  if (options.eval_every == 0) throw std::invalid_argument("online_run: eval_every must be >= 1");

  std::map<int, FlatSet> capped, full;
  for (const auto& [c, rows] : validation) {
    full.emplace(c, flatten_rows(rows));
    capped.emplace(c, subsample(rows, options.validation_cap, options.validation_seed + static_cast<std::uint64_t>(c)));
  }
  for (int c : config_sequence(train))
    if (!capped.count(c))
      throw std::invalid_argument(fmt::format("online_run: no validation set for configuration {}", c));

  OnlineResult result;
  result.reports.reserve(train.size());
  LearnerBank bank(feature_scales, hps, options.learner);
  const double t0 = train.front().t;
  const auto clock_start = std::chrono::steady_clock::now();

  for (std::size_t i = 0; i < train.size(); ++i) {
    const DatasetRow& row = train[i];
    const std::vector<double> x = row.features();
    result.reports.push_back(bank.step(x, row.accel, row.t - t0, options.strategy));

    if (i % options.eval_every == 0) {
      TraceEntry e;
      e.step = i;
      e.time = row.t;
      e.config = row.config;
      e.r2 = score_bank(bank, capped.at(row.config));
      e.r2_mean = mean3(e.r2);
      for (std::size_t d = 0; d < kDofs; ++d) e.buffer[d] = bank[d].model().size();
      e.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
      result.trace.entries.push_back(e);
    }

    const bool segment_end = i + 1 == train.size() || train[i + 1].config != row.config;
    if (segment_end) {
      SegmentScore s;
      s.config = row.config;
      s.end_step = i;
      s.r2 = score_bank(bank, full.at(row.config));
      s.mean = mean3(s.r2);
      result.segment_scores.push_back(s);
      if (options.on_segment_end) options.on_segment_end(row.config, bank);
    }
  }
  return result;
}

std::vector<SegmentStats> tail_stats(const EvalTrace& trace, double fraction) {
  std::vector<SegmentStats> out;
  const auto& e = trace.entries;
  std::size_t begin = 0;
  while (begin < e.size()) {
    std::size_t end = begin;
    while (end < e.size() && e[end].config == e[begin].config) ++end;
    const std::size_t len = end - begin;
    const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(len))));
    SegmentStats s;
    s.config = e[begin].config;
    s.entries = tail;
    double sum = 0.0;
    for (std::size_t i = end - tail; i < end; ++i) sum += e[i].r2_mean;
    s.mean = sum / static_cast<double>(tail);
    double var = 0.0;
    for (std::size_t i = end - tail; i < end; ++i) var += (e[i].r2_mean - s.mean) * (e[i].r2_mean - s.mean);
    s.std_dev = std::sqrt(var / static_cast<double>(tail));
    out.push_back(s);
    begin = end;
  }
  return out;
}

StrategyComparison compare_strategies(const Dataset& train, const std::map<int, Dataset>& validation,
                                      const DofHyperparams& hps, std::span<const double> feature_scales,
                                      OnlineOptions options) {
  StrategyComparison cmp;
  options.strategy = ForgettingStrategy::kde;
  cmp.kde = online_run(train, validation, hps, feature_scales, options);
  options.strategy = ForgettingStrategy::fifo;
  cmp.fifo = online_run(train, validation, hps, feature_scales, options);
  cmp.kde_stats = tail_stats(cmp.kde.trace, 1.0 / 3.0);
  cmp.fifo_stats = tail_stats(cmp.fifo.trace, 1.0 / 3.0);
  std::size_t forgotten = 0;
  for (const auto* run : {&cmp.kde, &cmp.fifo})
    for (const auto& step : run->reports)
      for (const auto& r : step) forgotten += r.forgotten;
  cmp.forgetting_inactive = forgotten == 0;
  return cmp;
}

// ---- hyperparameter search -------------------------------------------------

namespace {

double online_tune_score(const Dataset& train, const FlatSet& validation, std::size_t dof, const Hyperparams& hp,
                         std::span<const double> feature_scales, std::size_t steps,
                         const LearnerOptions& options) {
  OnlineLearner learner(hp, KernelParams({feature_scales.begin(), feature_scales.end()}, hp.gamma), options);
  const std::size_t tail = std::max<std::size_t>(steps / 10, 1);
  const std::size_t stride = std::max<std::size_t>(tail / 10, 1);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    learner.step({train[i].features(), train[i].accel[dof], train[i].t - train.front().t}, ForgettingStrategy::kde);
    const std::size_t left = steps - 1 - i;
    if (left < tail && left % stride == 0) {
      sum += r2_score(learner.predict(validation.points()), validation.y[dof]);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TuneResult tune(const Dataset& train, const Dataset& validation, const DofHyperparams& base,
                std::span<const double> feature_scales, const TuneGrid& grid, const SolverOptions& solver,
                const LearnerOptions& online) {
  if (grid.epsilon.empty() || grid.cost.empty() || grid.gamma.empty())
    throw std::invalid_argument("tune: empty grid axis");
  const FlatSet tr = subsample(train, grid.max_train, grid.seed);
  const FlatSet va = flatten_rows(validation);
  TuneResult result;
  result.best = base;
  result.best_r2.fill(-std::numeric_limits<double>::infinity());
  result.best_online_r2.fill(std::numeric_limits<double>::quiet_NaN());

  for (double gamma : grid.gamma) {
    const KernelParams kp({feature_scales.begin(), feature_scales.end()}, gamma);
    const DenseKernelMatrix gram(kernels::gram(tr.points(), kp.weights()), tr.size());
    const std::vector<double> cross = kernels::cross(va.points(), tr.points(), kp.weights());
    for (std::size_t d = 0; d < kDofs; ++d) {
      for (double eps : grid.epsilon) {
        for (double cost : grid.cost) {
          const SvrSolution sol = solve_dual(gram, tr.y[d], eps, cost, std::nullopt, solver);
          const std::vector<double> w = sol.weights();
          std::vector<double> pred(va.size(), sol.bias);
          for (std::size_t q = 0; q < va.size(); ++q) {
            const double* row = cross.data() + q * tr.size();
            double acc = 0.0;
            for (std::size_t j = 0; j < tr.size(); ++j) acc += w[j] * row[j];
            pred[q] += acc;
          }
          const double r2 = r2_score(pred, va.y[d]);
          result.records.push_back({d, eps, cost, gamma, r2});
          if (r2 > result.best_r2[d]) {
            result.best_r2[d] = r2;
            result.best[d].epsilon = eps;
            result.best[d].cost = cost;
            result.best[d].gamma = gamma;
          }
        }
      }
    }
  }

  const std::size_t steps = std::min(grid.online_steps, train.size());
  if (steps == 0) return result;
  for (std::size_t d = 0; d < kDofs; ++d) {
    double best_online = -std::numeric_limits<double>::infinity();
    for (double eps : grid.epsilon) {
      for (double cost : grid.cost) {
        const TuneRecord* top = nullptr;
        for (const auto& rec : result.records)
          if (rec.dof == d && rec.epsilon == eps && rec.cost == cost && (!top || rec.r2 > top->r2)) top = &rec;
        Hyperparams hp = base[d];
        hp.epsilon = eps;
        hp.cost = cost;
        hp.gamma = top->gamma;
        const double score = online_tune_score(train, va, d, hp, feature_scales, steps, online);
        result.online_records.push_back({d, eps, hp.cost, hp.gamma, score});
        if (score > best_online) {
          best_online = score;
          result.best[d] = hp;
          result.best_r2[d] = top->r2;
          result.best_online_r2[d] = score;
        }
      }
    }
  }
  return result;
}

}  // namespace auvlearn
