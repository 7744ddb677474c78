#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "auvlearn/commands.hpp"
#include "auvlearn/run_config.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using auvlearn::run_cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workdir {
  fs::path root;
  explicit Workdir(const std::string& name) : root(fs::temp_directory_path() / ("auvlearn_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }

  fs::path config(const std::string& text, const std::string& file = "run.json") const {
    std::ofstream(root / file) << text;
    return root / file;
  }
};

// Short segments and small buffers so every subcommand runs in well under a second.
const char* kSmall = R"({
  "dataset": "data.csv",
  "output_dir": "out",
  "eval_every": 5,
  "validation_cap": 20,
  "simulation": {"segment_duration": 60},
  "hyperparams": {
    "surge": {"epsilon": 0.001, "cost": 10, "gamma": 0.3, "buffer_size": 30},
    "sway": {"epsilon": 0.001, "cost": 10, "gamma": 0.3, "buffer_size": 30},
    "yaw": {"epsilon": 0.001, "cost": 10, "gamma": 0.3, "buffer_size": 30}
  },
  "tune": {"epsilon": [0.001, 0.01], "cost": [10], "gamma": [0.3, 3], "max_train": 0}
})";

int cli(std::vector<std::string> args, std::string* log = nullptr) {
  args.insert(args.begin(), "auvlearn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (log) *log = out.str() + err.str();
  return rc;
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("simulate writes a deterministic dataset") {
  Workdir w("simulate");
  const auto cfg = w.config(kSmall);
  REQUIRE(cli({"simulate", "--config", cfg.string()}) == 0);
  const std::string first = slurp(w.root / "data.csv");
  CHECK(first.rfind("t,u,v,r,n1,n2,n3,du,dv,dr,config\n", 0) == 0);
  CHECK(line_count(first) == 1 + 180);
  REQUIRE(cli({"simulate", "--config", cfg.string()}) == 0);
  CHECK(slurp(w.root / "data.csv") == first);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--seed", "7"}) == 0);
  CHECK(slurp(w.root / "data.csv") != first);
  CHECK_FALSE(fs::exists(w.root / "data.csv.partial"));
}

TEST_CASE("every subcommand runs end to end and is reproducible") {
  Workdir w("pipeline");
  const auto cfg = w.config(kSmall);
  REQUIRE(cli({"simulate", "--config", cfg.string()}) == 0);

  REQUIRE(cli({"baselines", "--config", cfg.string()}) == 0);
  const auto baselines = nlohmann::json::parse(slurp(w.root / "out" / "baselines.json"));
  CHECK(baselines.at("baselines").size() == 3);
  CHECK(baselines.at("baselines")[0].at("scores").size() == 3);

  std::string log;
  REQUIRE(cli({"online", "--config", cfg.string(), "--strategy", "fifo"}, &log) == 0);
  const std::string trace = slurp(w.root / "out" / "trace_fifo.csv");
  CHECK(trace.rfind("step,time,config,r2_surge,r2_sway,r2_yaw,r2_mean,buf_surge,buf_sway,buf_yaw\n", 0) == 0);
  CHECK(line_count(trace) == 1 + 144 / 5 + 1);
  for (int c = 1; c <= 3; ++c)
    for (const char* dof : {"surge", "sway", "yaw"})
      CHECK(fs::exists(w.root / "out" / "checkpoints_fifo" / ("config" + std::to_string(c) + "_" + dof + ".json")));
  REQUIRE(cli({"online", "--config", cfg.string(), "--strategy", "fifo"}) == 0);
  CHECK(slurp(w.root / "out" / "trace_fifo.csv") == trace);

  REQUIRE(cli({"online", "--config", cfg.string(), "--eval-every", "144"}) == 0);
  CHECK(line_count(slurp(w.root / "out" / "trace_kde.csv")) == 2);

  REQUIRE(cli({"compare", "--config", cfg.string(), "--out", (w.root / "cmp").string()}, &log) == 0);
  const auto summary = nlohmann::json::parse(slurp(w.root / "cmp" / "compare_summary.json"));
  CHECK(summary.at("final_third").size() == 3);
  CHECK_FALSE(summary.at("forgetting_inactive").get<bool>());
  CHECK(fs::exists(w.root / "cmp" / "trace_kde.csv"));
  CHECK(fs::exists(w.root / "cmp" / "trace_fifo.csv"));

  REQUIRE(cli({"tune", "--config", cfg.string()}, &log) == 0);
  CHECK(log.find("DOF") != std::string::npos);
  CHECK(line_count(slurp(w.root / "out" / "tune_grid.csv")) == 1 + 3 * 4 + 3 * 2);
  const auto tuned = nlohmann::json::parse(slurp(w.root / "out" / "tuned_hyperparams.json"));
  CHECK(tuned.at("hyperparams").at("yaw").at("buffer_size") == 30);
}

TEST_CASE("large capacity reports inactive forgetting") {
  Workdir w("inactive");
  const auto cfg = w.config(kSmall);
  REQUIRE(cli({"simulate", "--config", cfg.string()}) == 0);
  auto j = nlohmann::json::parse(kSmall);
  j["capacity"] = 5000;
  const auto big = w.config(j.dump(), "big.json");
  std::string log;
  REQUIRE(cli({"compare", "--config", big.string()}, &log) == 0);
  CHECK(log.find("forgetting inactive") != std::string::npos);
  CHECK(slurp(w.root / "out" / "trace_kde.csv") == slurp(w.root / "out" / "trace_fifo.csv"));
}

TEST_CASE("single configuration gives a one by one baseline matrix") {
  Workdir w("single");
  std::ofstream(w.root / "one.csv") << "t,u,v,r,n1,n2,n3,du,dv,dr,config\n";
  {
    std::ofstream f(w.root / "one.csv", std::ios::app);
    for (int i = 0; i < 40; ++i)
      f << i << "," << 0.1 * i << "," << -0.05 * i << "," << 0.01 * (i % 7) << ",0,0,0," << 0.02 * i << ","
        << 0.01 * (i % 5) << "," << -0.03 * (i % 3) << ",2\n";
  }
  auto j = nlohmann::json::parse(kSmall);
  j["dataset"] = "one.csv";
  const auto cfg = w.config(j.dump());
  REQUIRE(cli({"baselines", "--config", cfg.string()}) == 0);
  const auto b = nlohmann::json::parse(slurp(w.root / "out" / "baselines.json")).at("baselines");
  REQUIRE(b.size() == 1);
  CHECK(b[0].at("train_config") == 2);
  CHECK(b[0].at("scores").size() == 1);
}

TEST_CASE("errors exit nonzero without publishing outputs") {
  Workdir w("errors");
  std::string log;

  auto j = nlohmann::json::parse(kSmall);
  j["simulation"]["segment_durration"] = 10;
  const auto bad_key = w.config(j.dump(), "bad.json");
  CHECK(cli({"simulate", "--config", bad_key.string()}, &log) != 0);
  CHECK(log.find("segment_durration") != std::string::npos);
  CHECK_FALSE(fs::exists(w.root / "data.csv"));

  const auto cfg = w.config(kSmall);
  CHECK(cli({"baselines", "--config", cfg.string()}) != 0);  // no dataset yet
  CHECK(cli({"frobnicate", "--config", cfg.string()}) != 0);
  CHECK(cli({"online", "--config", cfg.string(), "--strategy", "lru"}) != 0);
  CHECK(cli({"online", "--config", cfg.string(), "--eval-every", "0"}) != 0);
  CHECK(cli({"online"}) != 0);
  CHECK(cli({"online", "--config", (w.root / "missing.json").string()}) != 0);

  std::ofstream(w.root / "data.csv") << "t,u,v,r,n1,n2,nX,du,dv,dr,config\n1,0,0,0,0,0,0,0,0,0,1\n";
  CHECK(cli({"online", "--config", cfg.string()}, &log) != 0);
  CHECK(log.find("nX") != std::string::npos);
  CHECK_FALSE(fs::exists(w.root / "out" / "trace_kde.csv"));
}

TEST_CASE("a failed publish leaves only quarantined output") {
  Workdir w("quarantine");
  const auto cfg = w.config(kSmall);
  REQUIRE(cli({"simulate", "--config", cfg.string()}) == 0);
  // A directory squatting on the final trace path makes the rename fail.
  fs::create_directories(w.root / "out" / "trace_kde.csv" / "blocker");
  CHECK(cli({"online", "--config", cfg.string()}) != 0);
  CHECK(fs::exists(w.root / "out" / "trace_kde.csv.partial"));
  CHECK(fs::is_directory(w.root / "out" / "trace_kde.csv"));
}

TEST_CASE("shipped default config equals the built-in defaults") {
  std::ifstream in(std::filesystem::path(AUVLEARN_SOURCE_DIR) / "configs" / "default.json");
  REQUIRE(in.good());
  std::stringstream text;
  text << in.rdbuf();
  CHECK(auvlearn::dump_run_config(auvlearn::parse_run_config(text.str())) ==
        auvlearn::dump_run_config(auvlearn::RunConfig{}));
}
