#pragma once

// Subcommands of the `auvlearn` tool. Each writes its files under a
// `.partial` suffix and renames them only once the whole command succeeded.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "auvlearn/run_config.hpp"

namespace auvlearn {

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<ForgettingStrategy> strategy;
  std::optional<std::size_t> eval_every;
};

/// Loads the config file and applies command-line overrides.
RunConfig resolve_config(const CommandOptions& opts);

void cmd_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_baselines(const RunConfig& cfg, std::ostream& log);
void cmd_online(const RunConfig& cfg, std::ostream& log);
void cmd_compare(const RunConfig& cfg, std::ostream& log);
void cmd_tune(const RunConfig& cfg, std::ostream& log);

/// Full command line entry point; returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace auvlearn
