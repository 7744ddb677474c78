#include "auvlearn/commands.hpp"

#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json_util.hpp"

namespace auvlearn {

namespace fs = std::filesystem;
using detail::json;

RunConfig resolve_config(const CommandOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.out) cfg.output_dir = *opts.out;
  if (opts.seed) cfg.override_seed(*opts.seed);
  if (opts.strategy) cfg.strategy = *opts.strategy;
  if (opts.eval_every) cfg.eval_every = *opts.eval_every;
  cfg.validate();
  return cfg;
}

namespace {

// Files are written as `<name>.partial` and renamed together by commit().
class StagedOutputs {
 public:
  fs::path stage(const fs::path& final_path) {
    if (final_path.has_parent_path()) fs::create_directories(final_path.parent_path());
    fs::path partial = final_path;
    partial += ".partial";
    staged_.emplace_back(partial, final_path);
    return partial;
  }

  void write(const fs::path& final_path, const std::string& text) {
    const fs::path p = stage(final_path);
    std::ofstream out(p, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + p.string());
  }

  void commit() {
    for (const auto& [partial, final_path] : staged_) fs::rename(partial, final_path);
    staged_.clear();
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

struct Prepared {
  DatasetSplit split;
  std::vector<double> scales;
  std::vector<int> configs;
};

Prepared prepare(const RunConfig& cfg) {
  if (!fs::exists(cfg.dataset)) throw std::runtime_error("dataset not found: " + cfg.dataset.string());
  const Dataset data = read_dataset(cfg.dataset.string());
  if (data.empty()) throw std::runtime_error("dataset is empty: " + cfg.dataset.string());
  Prepared p;
  p.split = stratified_split(data, {0.8, cfg.seeds.split});
  p.configs = config_sequence(p.split.train);
  p.scales = calibrate_feature_scales(rows_with_config(p.split.train, p.configs.front()));
  return p;
}

json dof_object(const std::array<double, kDofs>& v) {
  json j;
  for (std::size_t d = 0; d < kDofs; ++d) j[kDofNames[d]] = v[d];
  return j;
}

json stats_json(const std::vector<SegmentStats>& stats) {
  json arr = json::array();
  for (const auto& s : stats)
    arr.push_back({{"config", s.config}, {"entries", s.entries}, {"mean", s.mean}, {"std", s.std_dev}});
  return arr;
}

std::string trace_text(const EvalTrace& trace) {
  std::ostringstream s;
  write_trace(s, trace);
  return s.str();
}

LearnerOptions learner_options(const RunConfig& cfg) {
  LearnerOptions o;
  o.solver = cfg.solver;
  o.bandwidth_refit_every = cfg.kde_refit_every;
  return o;
}

OnlineOptions online_options(const RunConfig& cfg, const fs::path& checkpoint_dir, StagedOutputs& files) {
  OnlineOptions o;
  o.strategy = cfg.strategy;
  o.eval_every = cfg.eval_every;
  o.validation_cap = cfg.validation_cap;
  o.validation_seed = cfg.seeds.validation_subset;
  o.learner = learner_options(cfg);
  if (!checkpoint_dir.empty()) {
    o.on_segment_end = [&files, checkpoint_dir](int config, const LearnerBank& bank) {
      for (std::size_t d = 0; d < kDofs; ++d) {
        const fs::path p = files.stage(checkpoint_dir / fmt::format("config{}_{}.json", config, kDofNames[d]));
        save_checkpoint(p.string(), bank[d].model(), bank[d].hyperparams());
      }
    };
  }
  return o;
}

json segment_scores_json(const OnlineResult& r) {
  json arr = json::array();
  for (const auto& s : r.segment_scores)
    arr.push_back({{"config", s.config}, {"end_step", s.end_step}, {"r2", dof_object(s.r2)}, {"mean", s.mean}});
  return arr;
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const auto& sim = cfg.simulation;
  const Dataset data = generate_default_dataset(cfg.seeds.simulation, sim.segment_duration, sim.sample_rate,
                                                sim.noise_fraction, sim.amplitude, sim.dt);
  StagedOutputs files;
  std::ostringstream text;
  write_dataset(text, data);
  files.write(cfg.dataset, text.str());
  files.commit();
  std::map<int, std::size_t> counts;
  for (const auto& r : data) ++counts[r.config];
  log << fmt::format("wrote {} rows to {}\n", data.size(), cfg.dataset.string());
  for (const auto& [c, n] : counts) log << fmt::format("  config {}: {} rows\n", c, n);
}

void cmd_baselines(const RunConfig& cfg, std::ostream& log) {
  const Prepared p = prepare(cfg);
  const auto rows = baseline_matrix(p.split, cfg.effective_hyperparams(), p.scales, {cfg.offline_solver});
  json matrix = json::array();
  log << "offline baselines (mean R2; rows = training config, columns = validation config)\n";
  log << fmt::format("{:>8}", "train");
  for (int c : p.configs) log << fmt::format("{:>10}", c);
  log << "\n";
  for (const auto& row : rows) {
    json scores;
    log << fmt::format("{:>8}", row.train_config);
    for (const auto& [c, cell] : row.scores) {
      json cj = dof_object(cell.r2);
      cj["mean"] = cell.mean;
      scores[std::to_string(c)] = cj;
      log << fmt::format("{:>10.4f}", cell.mean);
    }
    json conv, svs;
    bool all_converged = true;
    for (std::size_t d = 0; d < kDofs; ++d) {
      conv[kDofNames[d]] = row.converged[d];
      svs[kDofNames[d]] = row.support_vectors[d];
      all_converged = all_converged && row.converged[d];
    }
    log << (all_converged ? "\n" : "   (solver did not converge)\n");
    matrix.push_back({{"train_config", row.train_config}, {"converged", conv}, {"support_vectors", svs},
                      {"scores", scores}});
  }
  StagedOutputs files;
  files.write(cfg.output_dir / "baselines.json", json{{"baselines", matrix}}.dump(2) + "\n");
  files.commit();
}

void cmd_online(const RunConfig& cfg, std::ostream& log) {
  const Prepared p = prepare(cfg);
  StagedOutputs files;
  const std::string tag = to_string(cfg.strategy);
  const OnlineOptions opts = online_options(cfg, cfg.output_dir / ("checkpoints_" + tag), files);
  const auto start = std::chrono::steady_clock::now();
  const OnlineResult r = online_run(p.split.train, p.split.validation, cfg.effective_hyperparams(), p.scales, opts);
  files.write(cfg.output_dir / fmt::format("trace_{}.csv", tag), trace_text(r.trace));
  const json summary{{"strategy", tag},
                     {"steps", p.split.train.size()},
                     {"segment_scores", segment_scores_json(r)},
                     {"last_tenth", stats_json(tail_stats(r.trace, 0.1))},
                     {"final_third", stats_json(tail_stats(r.trace, 1.0 / 3.0))}};
  files.write(cfg.output_dir / fmt::format("online_{}.json", tag), summary.dump(2) + "\n");
  files.commit();
  for (const auto& s : r.segment_scores)
    log << fmt::format("config {}: end-of-segment mean R2 {:.4f} (surge {:.4f}, sway {:.4f}, yaw {:.4f})\n",
                       s.config, s.mean, s.r2[0], s.r2[1], s.r2[2]);
  log << fmt::format("{} steps in {:.1f} s\n", p.split.train.size(),
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

void cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const Prepared p = prepare(cfg);
  StagedOutputs files;
  const OnlineOptions opts = online_options(cfg, {}, files);
  const StrategyComparison cmp =
      compare_strategies(p.split.train, p.split.validation, cfg.effective_hyperparams(), p.scales, opts);
  files.write(cfg.output_dir / "trace_kde.csv", trace_text(cmp.kde.trace));
  files.write(cfg.output_dir / "trace_fifo.csv", trace_text(cmp.fifo.trace));
  json segments = json::array();
  for (std::size_t i = 0; i < cmp.kde_stats.size(); ++i) {
    const auto& k = cmp.kde_stats[i];
    const auto& f = cmp.fifo_stats[i];
    segments.push_back({{"config", k.config},
                        {"kde", {{"mean", k.mean}, {"std", k.std_dev}}},
                        {"fifo", {{"mean", f.mean}, {"std", f.std_dev}}}});
    log << fmt::format("config {}: final third mean/std  kde {:.4f}/{:.4f}  fifo {:.4f}/{:.4f}\n", k.config,
                       k.mean, k.std_dev, f.mean, f.std_dev);
  }
  if (cmp.forgetting_inactive) log << "forgetting inactive: capacity never reached\n";
  const json summary{{"final_third", segments},
                     {"forgetting_inactive", cmp.forgetting_inactive},
                     {"kde_segment_scores", segment_scores_json(cmp.kde)},
                     {"fifo_segment_scores", segment_scores_json(cmp.fifo)}};
  files.write(cfg.output_dir / "compare_summary.json", summary.dump(2) + "\n");
  files.commit();
}

void cmd_tune(const RunConfig& cfg, std::ostream& log) {
  const Prepared p = prepare(cfg);
  const int first = p.configs.front();
  TuneGrid grid = cfg.tune;
  const TuneResult r = tune(rows_with_config(p.split.train, first), p.split.validation.at(first),
                            cfg.effective_hyperparams(), p.scales, grid, cfg.offline_solver,
                            learner_options(cfg));

  std::string table = fmt::format("{:<6}{:>10}{:>8}{:>8}{:>8}{:>6}{:>7}{:>7}{:>7}{:>10}\n", "DOF", "epsilon", "C",
                                  "gamma", "buffer", "k", "a", "b", "xi", "R2");
  table.pop_back();
  table += fmt::format("{:>10}\n", "online R2");
  json tuned;
  for (std::size_t d = 0; d < kDofs; ++d) {
    const Hyperparams& h = r.best[d];
    table += fmt::format("{:<6}{:>10}{:>8}{:>8}{:>8}{:>6}{:>7}{:>7}{:>7}{:>10.4f}\n", kDofNames[d], h.epsilon,
                         h.cost, h.gamma, h.buffer_size, h.k, h.a, h.b, h.xi, r.best_r2[d]);
    table.pop_back();
    table += fmt::format("{:>10.4f}\n", r.best_online_r2[d]);
    tuned[kDofNames[d]] = detail::hyperparams_to_json(h);
  }
  std::string grid_csv = "stage,dof,epsilon,cost,gamma,r2\n";
  for (const auto& rec : r.records)
    grid_csv += fmt::format("offline,{},{},{},{},{}\n", kDofNames[rec.dof], rec.epsilon, rec.cost, rec.gamma, rec.r2);
  for (const auto& rec : r.online_records)
    grid_csv += fmt::format("online,{},{},{},{},{}\n", kDofNames[rec.dof], rec.epsilon, rec.cost, rec.gamma, rec.r2);

  StagedOutputs files;
  files.write(cfg.output_dir / "tune_report.txt", table);
  files.write(cfg.output_dir / "tune_grid.csv", grid_csv);
  files.write(cfg.output_dir / "tuned_hyperparams.json", json{{"hyperparams", tuned}}.dump(2) + "\n");
  files.commit();
  log << table;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Online SVR learning of AUV dynamics"};
  app.require_subcommand(1);
  CommandOptions opts;
  std::string config, out_dir, strategy;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;

  using Handler = void (*)(const RunConfig&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands{
      {"simulate", "Generate the simulated dataset", cmd_simulate},
      {"baselines", "Offline train/validate matrix", cmd_baselines},
      {"online", "Online run with one forgetting strategy", cmd_online},
      {"compare", "Online runs with KDE and FIFO forgetting", cmd_compare},
      {"tune", "Grid search on the first configuration", cmd_tune},
  };
  std::map<CLI::App*, Handler> handlers;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Config file (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Base seed for simulation, split and validation subsets");
    sub->add_option("--strategy", strategy, "Forgetting strategy")->check(CLI::IsMember({"kde", "fifo"}));
    sub->add_option("--eval-every", eval_every, "Evaluation cadence in steps")->check(CLI::PositiveNumber);
    handlers[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    opts.config = config;
    if (sub->count("--out")) opts.out = out_dir;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--strategy")) opts.strategy = parse_strategy(strategy);
    if (sub->count("--eval-every")) opts.eval_every = eval_every;
    const RunConfig cfg = resolve_config(opts);
    handlers.at(sub)(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace auvlearn
