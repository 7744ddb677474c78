#include "auvlearn/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace auvlearn {

using detail::json;

// Output of `tune` on the default simulated dataset (configuration 1 only).
DofHyperparams default_hyperparams() {
  DofHyperparams hp;
  for (auto& h : hp) {
    h.epsilon = 0.001;
    h.cost = 10.0;
    h.gamma = 0.3;
    h.k = 10.0;
  }
  hp[2].epsilon = 0.003;
  hp[2].k = 1.0;
  return hp;
}

DofHyperparams RunConfig::effective_hyperparams() const {
  DofHyperparams hp = hyperparams;
  if (capacity)
    for (auto& h : hp) h.buffer_size = *capacity;
  return hp;
}

void RunConfig::override_seed(std::uint64_t s) {
  seeds.simulation = s;
  seeds.split = s + 1;
  seeds.validation_subset = s + 2;
}

void RunConfig::validate() const {
  if (eval_every == 0) throw std::invalid_argument("config: eval_every must be >= 1");
  if (validation_cap == 0) throw std::invalid_argument("config: validation_cap must be >= 1");
  if (kde_refit_every == 0) throw std::invalid_argument("config: kde_refit_every must be >= 1");
  if (capacity && *capacity == 0) throw std::invalid_argument("config: capacity must be >= 1");
  for (const SolverOptions* s : {&solver, &offline_solver})
    if (!(s->tolerance > 0.0) || s->max_iterations == 0)
      throw std::invalid_argument("config: solver tolerance and max_iterations must be positive");
  const auto& sim = simulation;
  if (!(sim.segment_duration > 0.0) || !(sim.sample_rate > 0.0) || !(sim.dt > 0.0))
    throw std::invalid_argument("config: simulation durations and rates must be positive");
  if (!(sim.amplitude >= 0.0) || !(sim.noise_fraction >= 0.0))
    throw std::invalid_argument("config: simulation amplitude and noise must be non-negative");
  for (const auto& h : effective_hyperparams()) h.validate();
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

SolverOptions solver_from_json(const json& j, SolverOptions base, const std::string& where) {
  detail::reject_unknown_keys(j, {"tolerance", "max_iterations"}, where);
  read_key(j, "tolerance", base.tolerance);
  read_key(j, "max_iterations", base.max_iterations);
  return base;
}

json solver_to_json(const SolverOptions& s) {
  return {{"tolerance", s.tolerance}, {"max_iterations", s.max_iterations}};
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  try {
    detail::reject_unknown_keys(j,
                                {"dataset", "output_dir", "strategy", "capacity", "eval_every",
                                 "validation_cap", "kde_refit_every", "solver", "offline_solver", "seeds",
                                 "simulation", "hyperparams", "tune"},
                                "config");
    if (j.contains("dataset")) cfg.dataset = j.at("dataset").get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("strategy")) cfg.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("capacity") && !j.at("capacity").is_null()) cfg.capacity = j.at("capacity").get<std::size_t>();
    read_key(j, "eval_every", cfg.eval_every);
    read_key(j, "validation_cap", cfg.validation_cap);
    read_key(j, "kde_refit_every", cfg.kde_refit_every);
    if (j.contains("solver")) cfg.solver = solver_from_json(j.at("solver"), cfg.solver, "config.solver");
    if (j.contains("offline_solver"))
      cfg.offline_solver = solver_from_json(j.at("offline_solver"), cfg.offline_solver, "config.offline_solver");
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      detail::reject_unknown_keys(s, {"simulation", "split", "validation_subset"}, "config.seeds");
      read_key(s, "simulation", cfg.seeds.simulation);
      read_key(s, "split", cfg.seeds.split);
      read_key(s, "validation_subset", cfg.seeds.validation_subset);
    }
    if (j.contains("simulation")) {
      const json& s = j.at("simulation");
      detail::reject_unknown_keys(s, {"segment_duration", "sample_rate", "dt", "amplitude", "noise_fraction"},
                                  "config.simulation");
      read_key(s, "segment_duration", cfg.simulation.segment_duration);
      read_key(s, "sample_rate", cfg.simulation.sample_rate);
      read_key(s, "dt", cfg.simulation.dt);
      read_key(s, "amplitude", cfg.simulation.amplitude);
      read_key(s, "noise_fraction", cfg.simulation.noise_fraction);
    }
    if (j.contains("hyperparams")) {
      const json& h = j.at("hyperparams");
      detail::reject_unknown_keys(h, {"surge", "sway", "yaw"}, "config.hyperparams");
      for (std::size_t d = 0; d < kDofs; ++d)
        if (h.contains(kDofNames[d]))
          cfg.hyperparams[d] = detail::hyperparams_from_json(h.at(kDofNames[d]), cfg.hyperparams[d],
                                                             std::string("config.hyperparams.") + kDofNames[d]);
    }
    if (j.contains("tune")) {
      const json& t = j.at("tune");
      detail::reject_unknown_keys(t, {"epsilon", "cost", "gamma", "max_train", "seed", "online_steps"},
                                  "config.tune");
      read_key(t, "epsilon", cfg.tune.epsilon);
      read_key(t, "cost", cfg.tune.cost);
      read_key(t, "gamma", cfg.tune.gamma);
      read_key(t, "max_train", cfg.tune.max_train);
      read_key(t, "seed", cfg.tune.seed);
      read_key(t, "online_steps", cfg.tune.online_steps);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value: ") + e.what());
  }
  if (cfg.dataset.is_relative() && !base_dir.empty()) cfg.dataset = base_dir / cfg.dataset;
  if (cfg.output_dir.is_relative() && !base_dir.empty()) cfg.output_dir = base_dir / cfg.output_dir;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

std::string dump_run_config(const RunConfig& cfg) {
  json h;
  for (std::size_t d = 0; d < kDofs; ++d) h[kDofNames[d]] = detail::hyperparams_to_json(cfg.hyperparams[d]);
  json j{{"dataset", cfg.dataset.string()},
         {"output_dir", cfg.output_dir.string()},
         {"strategy", to_string(cfg.strategy)},
         {"capacity", cfg.capacity ? json(*cfg.capacity) : json(nullptr)},
         {"eval_every", cfg.eval_every},
         {"validation_cap", cfg.validation_cap},
         {"kde_refit_every", cfg.kde_refit_every},
         {"solver", solver_to_json(cfg.solver)},
         {"offline_solver", solver_to_json(cfg.offline_solver)},
         {"seeds",
          {{"simulation", cfg.seeds.simulation},
           {"split", cfg.seeds.split},
           {"validation_subset", cfg.seeds.validation_subset}}},
         {"simulation",
          {{"segment_duration", cfg.simulation.segment_duration},
           {"sample_rate", cfg.simulation.sample_rate},
           {"dt", cfg.simulation.dt},
           {"amplitude", cfg.simulation.amplitude},
           {"noise_fraction", cfg.simulation.noise_fraction}}},
         {"hyperparams", h},
         {"tune",
          {{"epsilon", cfg.tune.epsilon},
           {"cost", cfg.tune.cost},
           {"gamma", cfg.tune.gamma},
           {"max_train", cfg.tune.max_train},
           {"online_steps", cfg.tune.online_steps},
           {"seed", cfg.tune.seed}}}};
  return j.dump(2) + "\n";
}

}  // namespace auvlearn
