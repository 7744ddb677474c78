#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "auvlearn/evaluation.hpp"

namespace auvlearn {

struct SeedConfig {
  std::uint64_t simulation = 1;
  std::uint64_t split = 2;
  std::uint64_t validation_subset = 3;
};

struct SimulationConfig {
  double segment_duration = 10000.0;  // seconds per configuration
  double sample_rate = 1.0;
  double dt = 0.01;
  double amplitude = 15.0;
  double noise_fraction = 0.02;
};

/// Per-output hyperparameters used when a config file does not override them.
DofHyperparams default_hyperparams();

struct RunConfig {
  std::filesystem::path dataset = "dataset.csv";
  std::filesystem::path output_dir = "out";
  ForgettingStrategy strategy = ForgettingStrategy::kde;
  std::optional<std::size_t> capacity;  // overrides every buffer_size
  std::size_t eval_every = 10;
  std::size_t validation_cap = 500;
  std::size_t kde_refit_every = 50;
  SolverOptions solver{1e-3, 100000};
  SolverOptions offline_solver{1e-3, 5'000'000};
  SeedConfig seeds;
  SimulationConfig simulation;
  DofHyperparams hyperparams = default_hyperparams();
  TuneGrid tune;

  /// hyperparams with `capacity` applied.
  DofHyperparams effective_hyperparams() const;
  /// simulation = s, split = s + 1, validation subset = s + 2.
  void override_seed(std::uint64_t s);
  void validate() const;
};

/// Parses a JSON config. Relative paths are resolved against `base_dir`.
/// Missing keys keep their defaults; unknown keys throw.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::string dump_run_config(const RunConfig& cfg);

}  // namespace auvlearn
