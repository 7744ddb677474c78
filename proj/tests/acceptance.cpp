// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// fails. `acceptance 1 4 8` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "auvlearn/auv_dynamics.hpp"
#include "auvlearn/evaluation.hpp"
#include "auvlearn/online_learner.hpp"
#include "auvlearn/run_config.hpp"
#include "auvlearn/svr.hpp"
#include "support/dual_checks.hpp"
#include "support/qp_oracle.hpp"
#include "support/random.hpp"

using namespace auvlearn;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void note(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

// ---- shared fixtures ---------------------------------------------------------

struct Experiment {
  RunConfig cfg;
  Dataset data;
  DatasetSplit split;
  std::vector<double> scales;
  DofHyperparams tuned;  // grid search on configuration 1, as `tune` does
};

const Experiment& experiment() {
  static const Experiment e = [] {
    Experiment x;
    const auto& sim = x.cfg.simulation;
    x.data = generate_default_dataset(x.cfg.seeds.simulation, sim.segment_duration, sim.sample_rate,
                                      sim.noise_fraction, sim.amplitude, sim.dt);
    x.split = stratified_split(x.data, {0.8, x.cfg.seeds.split});
    const int first = x.split.train.front().config;
    x.scales = calibrate_feature_scales(rows_with_config(x.split.train, first));
    x.tuned = tune(rows_with_config(x.split.train, first), x.split.validation.at(first),
                   x.cfg.effective_hyperparams(), x.scales, x.cfg.tune, x.cfg.offline_solver)
                  .best;
    return x;
  }();
  return e;
}

OnlineOptions online_options(ForgettingStrategy s) {
  const RunConfig& cfg = experiment().cfg;
  OnlineOptions o;
  o.strategy = s;
  o.eval_every = 10;
  o.validation_cap = cfg.validation_cap;
  o.validation_seed = cfg.seeds.validation_subset;
  o.learner.solver = cfg.solver;
  o.learner.bandwidth_refit_every = cfg.kde_refit_every;
  return o;
}

std::vector<BaselineRow>& baselines() {
  static std::vector<BaselineRow> rows;
  return rows;
}

struct OnlineRuns {
  OnlineResult kde, fifo;
  double kde_seconds = 0.0;
  double checkpoint_drift = -1.0;
  std::size_t checkpoints = 0;
};

OnlineRuns& online_runs() {
  static OnlineRuns runs;
  static bool done = false;
  if (done) return runs;
  done = true;
  const Experiment& e = experiment();
  const auto& hp = e.tuned;

  OnlineOptions o = online_options(ForgettingStrategy::kde);
  double drift = 0.0;
  o.on_segment_end = [&](int config, const LearnerBank& bank) {
    for (std::size_t d = 0; d < kDofs; ++d) {
      std::stringstream buf;
      save_checkpoint(buf, bank[d].model(), bank[d].hyperparams());
      const Checkpoint cp = load_checkpoint(buf);
      for (const auto& row : e.split.validation.at(config)) {
        const auto x = row.features();
        drift = std::max(drift, std::abs(predict(cp.model, x) - bank[d].predict(x)));
      }
      ++runs.checkpoints;
    }
  };
  auto t0 = Clock::now();
  runs.kde = online_run(e.split.train, e.split.validation, hp, e.scales, o);
  runs.kde_seconds = seconds_since(t0);
  runs.checkpoint_drift = drift;
  note(fmt::format("online KDE run: {} steps in {:.0f} s", e.split.train.size(), runs.kde_seconds));

  t0 = Clock::now();
  runs.fifo = online_run(e.split.train, e.split.validation, hp, e.scales, online_options(ForgettingStrategy::fifo));
  note(fmt::format("online FIFO run: {:.0f} s", seconds_since(t0)));
  return runs;
}

// ---- criteria ----------------------------------------------------------------

Outcome solver_vs_oracle() {
  const auto t0 = Clock::now();
  gen::Rng rng(20240601);
  const SolverOptions tight{1e-10, 1'000'000};
  double worst_obj = 0.0, worst_pred = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = gen::index(rng, 1, 25), dim = gen::index(rng, 1, 6);
    const KernelParams kernel(gen::positive(rng, dim, 0.5, 2.0), gen::uniform(rng, 0.1, 3.0));
    Hyperparams hp;
    hp.epsilon = gen::uniform(rng, 0.0, 0.3);
    hp.cost = std::exp(gen::uniform(rng, std::log(0.1), std::log(100.0)));
    hp.gamma = kernel.gamma();
    std::vector<Sample> samples(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      samples[i].x = gen::point(rng, dim);
      samples[i].y = y[i] = std::cos(samples[i].x[0]) + gen::uniform(rng, -0.5, 0.5);
    }
    Eigen::MatrixXd k(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) = kernel_eval(samples[i].x, samples[j].x, kernel);

    const SvrSolution sol = solve_dual(samples, hp, kernel, std::nullopt, tight);
    const auto ref = oracle::solve_svr_dual(k, y, hp.epsilon, hp.cost);
    worst_obj = std::max(worst_obj, std::abs(sol.objective - ref.objective));
    const SupportSet model = make_support_set(samples, sol, kernel, n);
    for (int probe = 0; probe < 20; ++probe) {
      const auto x = gen::point(rng, dim);
      double f = ref.bias;
      for (std::size_t i = 0; i < n; ++i) f += (ref.alphas[i] - ref.betas[i]) * kernel_eval(samples[i].x, x, kernel);
      worst_pred = std::max(worst_pred, std::abs(predict(model, x) - f));
    }
  }
  const double secs = seconds_since(t0);
  return {worst_obj <= 1e-6 && worst_pred <= 1e-4 && secs < 30.0,
          fmt::format("max |dobj| {:.2e}, max |dpred| {:.2e}, {:.1f} s", worst_obj, worst_pred, secs)};
}

Outcome streaming_invariants() {
  const auto t0 = Clock::now();
  const Experiment& e = experiment();
  auto hp = e.cfg.effective_hyperparams();
  for (auto& h : hp) h.buffer_size = 200;
  const Dataset stream(e.split.train.begin(), e.split.train.begin() + 2000);

  LearnerOptions lo;
  lo.solver = e.cfg.solver;
  lo.bandwidth_refit_every = e.cfg.kde_refit_every;
  std::size_t over_cap = 0, mutated = 0, outside_fence = 0, discards = 0, fences = 0;
  auto run = [&](bool check) {
    LearnerBank bank(e.scales, hp, lo);
    std::vector<std::array<PipelineReport, kDofs>> reports;
    for (const auto& row : stream) {
      std::array<SupportSet, kDofs> before{bank[0].model(), bank[1].model(), bank[2].model()};
      const auto rep = bank.step(row.features(), row.accel, row.t - stream.front().t, ForgettingStrategy::kde);
      if (check)
        for (std::size_t d = 0; d < kDofs; ++d) {
          const SupportSet& after = bank[d].model();
          if (after.size() > 200) ++over_cap;
          if (!rep[d].admitted) {
            ++discards;
            if (after.samples.size() != before[d].samples.size() || after.weights != before[d].weights ||
                after.bias != before[d].bias)
              ++mutated;
            else
              for (std::size_t i = 0; i < after.size(); ++i)
                if (after.samples[i].x != before[d].samples[i].x || after.samples[i].y != before[d].samples[i].y ||
                    after.samples[i].t != before[d].samples[i].t)
                  ++mutated;
          }
          if (rep[d].fence) {
            ++fences;
            if (rep[d].survivor_residual_min < rep[d].fence->lower ||
                rep[d].survivor_residual_max > rep[d].fence->upper)
              ++outside_fence;
          }
        }
      reports.push_back(rep);
    }
    std::array<SupportSet, kDofs> models{bank[0].model(), bank[1].model(), bank[2].model()};
    return std::make_pair(reports, models);
  };
  const auto first = run(true);
  const auto second = run(false);
  bool identical = first.first == second.first;
  for (std::size_t d = 0; d < kDofs && identical; ++d)
    identical = first.second[d].weights == second.second[d].weights && first.second[d].bias == second.second[d].bias;
  const double secs = seconds_since(t0);
  return {over_cap == 0 && mutated == 0 && outside_fence == 0 && identical && secs < 120.0,
          fmt::format("over cap {}, mutated discards {}/{}, fence breaches {}/{}, reruns identical {}, {:.1f} s",
                      over_cap, mutated, discards, outside_fence, fences, identical ? "yes" : "no", secs)};
}

Outcome forgetting_semantics() {
  Hyperparams hp;
  hp.k = 10.0;
  auto model = [](std::vector<Sample> s, std::size_t cap) {
    SupportSet m(KernelParams(std::vector<double>(s.front().x.size(), 1.0), 1.0), cap);
    m.weights.assign(s.size(), 0.1);
    m.samples = std::move(s);
    return m;
  };
  int ok = 0;

  hp.buffer_size = 1;
  const SupportSet aged = forget(model({{{1.0, 2.0}, 0.0, 0.0}, {{1.0, 2.0}, 0.0, 100.0}}, 1), hp,
                                 BandwidthMatrix(0.5, {1.0, 1.0}));
  ok += aged.size() == 1 && aged.samples[0].t == 100.0;

  hp.buffer_size = 3;
  const SupportSet dense = forget(model({{{0.0}, 0, 5.0}, {{0.3}, 0, 5.0}, {{1.5}, 0, 5.0}, {{4.0}, 0, 5.0}}, 3),
                                  hp, BandwidthMatrix(1.0, {1.0}));
  bool densest_gone = dense.size() == 3;
  for (const auto& s : dense.samples) densest_gone = densest_gone && s.x[0] != 0.3;
  ok += densest_gone;

  hp.buffer_size = 5;
  std::vector<Sample> cluster(5, Sample{{0.0, 0.0}, 0.0, 7.0});
  cluster.push_back({{5.0, 5.0}, 0.0, 7.0});
  const SupportSet kept = forget(model(cluster, 5), hp, BandwidthMatrix(0.5, {1.0, 1.0}));
  ok += kept.size() == 5 && kept.samples.back().x[0] == 5.0;

  return {ok == 3, fmt::format("{}/3 cases (older removed, densest removed, isolated kept)", ok)};
}

Outcome offline_separation() {
  const auto t0 = Clock::now();
  const Experiment& e = experiment();
  baselines() = baseline_matrix(e.split, e.tuned, e.scales, {e.cfg.offline_solver});
  const double secs = seconds_since(t0);
  bool pass = secs < 600.0;
  std::string detail;
  for (const auto& row : baselines()) {
    const double own = row.scores.at(row.train_config).mean;
    double best_cross = -1e300;
    for (const auto& [c, cell] : row.scores)
      if (c != row.train_config) best_cross = std::max(best_cross, cell.mean);
    pass = pass && own >= 0.9 && own - best_cross >= 0.05;
    for (bool c : row.converged) pass = pass && c;
    detail += fmt::format("config {}: own {:.4f}, best cross {:.4f}; ", row.train_config, own, best_cross);
    std::string line = fmt::format("train {}:", row.train_config);
    for (const auto& [c, cell] : row.scores) line += fmt::format(" {:.4f}", cell.mean);
    note(line);
  }
  return {pass, detail + fmt::format("{:.0f} s", secs)};
}

Outcome online_tracking() {
  if (baselines().empty()) offline_separation();
  const OnlineRuns& runs = online_runs();
  std::map<int, double> diag;
  for (const auto& row : baselines()) diag[row.train_config] = row.scores.at(row.train_config).mean;

  const auto tail = tail_stats(runs.kde.trace, 0.1);
  bool pass = runs.kde_seconds < 1800.0;
  std::string detail;
  for (const auto& s : tail) {
    const double gap = std::abs(s.mean - diag.at(s.config));
    pass = pass && gap <= 0.05;
    detail += fmt::format("config {}: last tenth {:.4f} vs offline {:.4f}; ", s.config, s.mean, diag.at(s.config));
  }
  // Drop after each switch: pre-switch level against the lowest score in the
  // first tenth of the new segment.
  const auto& entries = runs.kde.trace.entries;
  std::size_t seg_start = 0;
  for (std::size_t i = 1; i <= entries.size(); ++i) {
    if (i < entries.size() && entries[i].config == entries[seg_start].config) continue;
    if (seg_start > 0) {
      const std::size_t len = i - seg_start;
      const std::size_t window = std::max<std::size_t>(1, len / 10);
      double low = 1e300;
      for (std::size_t j = seg_start; j < seg_start + window; ++j) low = std::min(low, entries[j].r2_mean);
      double before = 0.0;
      for (const auto& s : tail)
        if (s.config == entries[seg_start - 1].config) before = s.mean;
      pass = pass && before - low >= 0.1;
      detail += fmt::format("switch to {}: drop {:.4f}; ", entries[seg_start].config, before - low);
    }
    seg_start = i;
  }
  return {pass, detail + fmt::format("{:.0f} s", runs.kde_seconds)};
}

Outcome fifo_vs_kde() {
  const OnlineRuns& runs = online_runs();
  const auto k = tail_stats(runs.kde.trace, 1.0 / 3.0);
  const auto f = tail_stats(runs.fifo.trace, 1.0 / 3.0);
  int noisier = 0, not_worse = 0;
  std::string detail;
  for (std::size_t i = 0; i < k.size() && i < f.size(); ++i) {
    noisier += f[i].std_dev > k[i].std_dev;
    not_worse += k[i].mean >= f[i].mean;
    detail += fmt::format("config {}: kde {:.4f}/{:.4f} fifo {:.4f}/{:.4f}; ", k[i].config, k[i].mean, k[i].std_dev,
                          f[i].mean, f[i].std_dev);
  }
  return {noisier >= 2 && not_worse >= 2,
          detail + fmt::format("fifo noisier in {}/3, kde mean >= fifo in {}/3", noisier, not_worse)};
}

Outcome simulator_physics() {
  const auto t0 = Clock::now();
  gen::Rng rng(77);
  const ConfigLabel labels[] = {ConfigLabel::default_config, ConfigLabel::thruster_damage,
                                ConfigLabel::damping_change};
  double worst_work = 0.0;
  std::size_t energy_gains = 0;
  bool equilibrium = true;
  for (auto label : labels) {
    const VehicleConfig cfg = make_configuration(label);
    for (int i = 0; i < 1000; ++i) {
      const Eigen::Vector3d nu(gen::uniform(rng, -2, 2), gen::uniform(rng, -2, 2), gen::uniform(rng, -1, 1));
      worst_work = std::max(worst_work, std::abs(nu.dot(coriolis(cfg.mass, nu) * nu)));
    }
    SimState s;
    s.nu = Eigen::Vector3d(gen::uniform(rng, -1.5, 1.5), gen::uniform(rng, -1.5, 1.5), gen::uniform(rng, -1, 1));
    double energy = 0.5 * s.nu.dot(cfg.mass * s.nu);
    for (int i = 0; i < 3000; ++i) {
      s = integrate_step(s, Eigen::Vector3d::Zero(), cfg, 0.01);
      const double next = 0.5 * s.nu.dot(cfg.mass * s.nu);
      energy_gains += next > energy;
      energy = next;
    }
    const StateDerivative d = derivative(SimState{}, Eigen::Vector3d::Zero(), cfg);
    SimState rest;
    const SimState after = integrate_step(rest, Eigen::Vector3d::Zero(), cfg, 0.01);
    equilibrium = equilibrium && d.nu_dot.isZero(0.0) && d.psi_dot == 0.0 && after.nu.isZero(0.0) && after.psi == 0.0;
  }

  const VehicleConfig cfg = make_configuration(ConfigLabel::damping_change);
  SimState s0;
  s0.nu = Eigen::Vector3d(0.8, -0.5, 0.6);
  const Eigen::Vector3d n(12.0, -7.0, 15.0);
  auto run = [&](double dt) {
    SimState s = s0;
    for (long i = 0, steps = std::lround(2.0 / dt); i < steps; ++i) s = integrate_step(s, n, cfg, dt);
    return s.nu;
  };
  const Eigen::Vector3d ref = run(1.0 / 12800.0);
  const double e1 = (run(0.2) - ref).norm(), e2 = (run(0.1) - ref).norm(), e3 = (run(0.05) - ref).norm();
  const double p1 = std::log2(e1 / e2), p2 = std::log2(e2 / e3);
  const bool order_ok = p1 >= 3.5 && p1 <= 4.5 && p2 >= 3.5 && p2 <= 4.5;
  const double secs = seconds_since(t0);
  return {worst_work <= 1e-12 && energy_gains == 0 && equilibrium && order_ok && secs < 60.0,
          fmt::format("max |nu'C nu| {:.1e}, energy increases {}, equilibrium {}, observed order {:.3f}/{:.3f}, {:.1f} s",
                      worst_work, energy_gains, equilibrium ? "exact" : "broken", p1, p2, secs)};
}

Outcome evaluation_fixtures() {
  const std::vector<double> y{1.0, 2.0, 3.0};
  const bool r2_ok = r2_score(y, y) == 1.0 && r2_score(std::vector<double>{2.0, 2.0, 2.0}, y) == 0.0 &&
                     r2_score(std::vector<double>{1.0, 2.0, 4.0}, y) == 0.5;
  const Experiment& e = experiment();
  bool counts_ok = e.split.train.size() == 24000;
  for (const auto& [c, rows] : e.split.validation)
    counts_ok = counts_ok && rows.size() == 2000 && rows_with_config(e.split.train, c).size() == 8000;
  const OnlineRuns& runs = online_runs();
  const bool drift_ok = runs.checkpoints == 9 && runs.checkpoint_drift >= 0.0 && runs.checkpoint_drift <= 1e-12;
  return {r2_ok && counts_ok && drift_ok,
          fmt::format("r2 fixtures {}, split counts {}, checkpoint drift {:.1e} over {} checkpoints",
                      r2_ok ? "exact" : "wrong", counts_ok ? "exact" : "wrong", runs.checkpoint_drift,
                      runs.checkpoints)};
}

}  // namespace

int main(int argc, char** argv) {
  checks::FeasibilityMonitor monitor;
  monitor.install();

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"SMO agrees with the dense QP oracle", solver_vs_oracle},
      {"dual feasibility of every solve", nullptr},
      {"streaming invariants at capacity 200", streaming_invariants},
      {"forgetting semantics", forgetting_semantics},
      {"offline baselines separate configurations", offline_separation},
      {"online KDE tracks offline and drops at switches", online_tracking},
      {"FIFO final third noisier than KDE", fifo_vs_kde},
      {"simulator physics", simulator_physics},
      {"evaluation fixtures and checkpoints", evaluation_fixtures},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= 9; ++i) selected.insert(i);

  // Dataset generation, split and tuning are shared setup, not part of any
  // criterion's runtime.
  if (std::any_of(selected.begin(), selected.end(), [](int i) { return i >= 3 && i != 4 && i != 8; })) {
    const auto t0 = Clock::now();
    const Experiment& e = experiment();
    std::printf("setup: %zu rows, tuned in %.1f s\n", e.data.size(), seconds_since(t0));
    for (std::size_t d = 0; d < kDofs; ++d)
      note(fmt::format("{}: epsilon {} C {} gamma {}", kDofNames[d], e.tuned[d].epsilon, e.tuned[d].cost,
                       e.tuned[d].gamma));
  }

  std::map<int, Outcome> outcomes;
  for (int i = 1; i <= 9; ++i) {
    if (!selected.count(i) || i == 2) continue;
    std::printf("running criterion %d: %s\n", i, criteria[i - 1].first);
    std::fflush(stdout);
    try {
      outcomes[i] = criteria[i - 1].second();
    } catch (const std::exception& ex) {
      outcomes[i] = {false, std::string("exception: ") + ex.what()};
    }
  }
  checks::FeasibilityMonitor::uninstall();
  if (selected.count(2))
    outcomes[2] = {monitor.solves > 0 && monitor.violations == 0,
                   fmt::format("{} solves checked, {} infeasible{}", monitor.solves, monitor.violations,
                               monitor.violations ? " (first: " + monitor.first + ")" : "")};

  bool all = true;
  std::printf("\n");
  for (const auto& [i, o] : outcomes) {
    std::printf("%s  criterion %d  %s: %s\n", o.pass ? "PASS" : "FAIL", i, criteria[i - 1].first, o.detail.c_str());
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
