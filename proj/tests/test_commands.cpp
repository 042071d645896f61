#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "pursuit/commands.hpp"
#include "pursuit/maddpg.hpp"
#include "pursuit/metrics.hpp"

using namespace pursuit;
using namespace pursuit::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"([run]
preset = drone-demo
[world]
episode_length = 20
n_obstacles = 2
rng_seed = 4
[training]
episodes = 6
batch_size = 32
buffer_capacity = 2000
update_every = 10
hidden_units = 8
seed = 4
[metrics]
grid_resolution = 100
truncate = 0
)";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("pursuit_cmd_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int train(const fs::path& config, const fs::path& out, std::string* stdout_text = nullptr,
          std::optional<fs::path> resume = std::nullopt) {
  TrainOptions o;
  o.config_path = config;
  o.out = out;
  o.resume = resume;
  o.trajectory_every = 3;
  o.progress_every = 2;
  std::ostringstream so, se;
  const int rc = cmd_train(o, so, se);
  if (stdout_text) *stdout_text = so.str() + se.str();
  return rc;
}

metrics::StepRow row(int step, std::size_t id, env::Role role, double x, double y) {
  metrics::StepRow r;
  r.step = step;
  r.agent_id = id;
  r.role = role;
  r.x = x;
  r.y = y;
  return r;
}

}  // namespace

TEST_CASE("train writes every output and they parse") {
  TempDir tmp("smoke");
  auto text = std::string(kSmallConfig);
  text.replace(text.find("episodes = 6"), 12, "episodes = 1");
  const auto cfg = write_file(tmp.path / "c.ini", text);
  std::string log;
  REQUIRE(train(cfg, tmp.path / "out", &log) == 0);
  const auto out = tmp.path / "out";
  CHECK(log.find("[progress] episode=1 ") != std::string::npos);

  CHECK(same_config(load_config(out / "config.ini"), parse_config(text)));
  std::ifstream agg(out / "aggregate.csv");
  const auto rows = metrics::read_aggregate_csv(agg);
  CHECK(rows.size() == 1);
  CHECK(slurp(out / "losses.csv").rfind("episode,agent,critic_loss,actor_objective\n", 0) == 0);

  const auto manifest = nlohmann::json::parse(slurp(out / "run_manifest.json"));
  CHECK(manifest["episodes"] == 1);
  const auto final_ckpt = out / manifest["final_checkpoint"].get<std::string>();
  CHECK(fs::exists(final_ckpt / "manifest.json"));
  CHECK(fs::exists(out / "checkpoints" / "ckpt_000000" / "agent_000.spnn"));
  CHECK(maddpg::read_manifest(final_ckpt).episode == 1);

  std::ifstream steps(out / "trajectories" / "episode_000000.csv");
  const auto step_rows = metrics::read_step_csv(steps);
  CHECK(step_rows.size() == 20 * 6);
  CHECK(fs::exists(out / "trajectories" / "episode_000000.obstacles.csv"));
}

TEST_CASE("missing and invalid configs fail with a diagnostic") {
  TempDir tmp("bad");
  std::string log;
  CHECK(train(tmp.path / "absent.ini", tmp.path / "out", &log) != 0);
  CHECK(log.find("absent.ini") != std::string::npos);

  const auto bad = write_file(tmp.path / "bad.ini", "[rewards]\nc4 = 1\n");
  CHECK(train(bad, tmp.path / "out", &log) != 0);
  CHECK(log.find("rewards.c4") != std::string::npos);

  const std::string cmd = std::string(PURSUIT_CLI_PATH) + " train --config " + (tmp.path / "absent.ini").string() +
                          " > " + (tmp.path / "cli.txt").string() + " 2>&1";
  CHECK(std::system(cmd.c_str()) != 0);
  CHECK(slurp(tmp.path / "cli.txt").find("absent.ini") != std::string::npos);
}

TEST_CASE("training twice gives byte-identical outputs") {
  TempDir tmp("twice");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  REQUIRE(train(cfg, tmp.path / "a") == 0);
  REQUIRE(train(cfg, tmp.path / "b") == 0);
  CHECK(slurp(tmp.path / "a" / "aggregate.csv") == slurp(tmp.path / "b" / "aggregate.csv"));
  CHECK(slurp(tmp.path / "a" / "losses.csv") == slurp(tmp.path / "b" / "losses.csv"));
  for (const auto& e : fs::directory_iterator(tmp.path / "a" / "checkpoints" / "ckpt_000006")) {
    const auto name = e.path().filename();
    CHECK(slurp(e.path()) == slurp(tmp.path / "b" / "checkpoints" / "ckpt_000006" / name));
  }

  TrainOptions o;
  o.config_path = cfg;
  o.out = tmp.path / "c";
  o.seed = 77;
  std::ostringstream so, se;
  REQUIRE(cmd_train(o, so, se) == 0);
  CHECK(slurp(tmp.path / "a" / "aggregate.csv") != slurp(tmp.path / "c" / "aggregate.csv"));
}

TEST_CASE("resume continues the run exactly") {
  TempDir tmp("resume");
  auto text = std::string(kSmallConfig);
  text.insert(text.find("[metrics]"), "checkpoint_every = 3\n");
  const auto cfg = write_file(tmp.path / "c.ini", text);
  REQUIRE(train(cfg, tmp.path / "full") == 0);
  const auto mid = tmp.path / "full" / "checkpoints" / "ckpt_000003";
  REQUIRE(fs::exists(mid / "replay.bin"));
  REQUIRE(train(cfg, tmp.path / "resumed", nullptr, mid) == 0);

  std::ifstream fa(tmp.path / "full" / "aggregate.csv"), fb(tmp.path / "resumed" / "aggregate.csv");
  const auto a = metrics::read_aggregate_csv(fa);
  const auto b = metrics::read_aggregate_csv(fb);
  REQUIRE(a.size() == 6);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b[i].episode == a[i + 3].episode);
    CHECK(b[i].min_d == a[i + 3].min_d);
    CHECK(b[i].rew_pursuer == a[i + 3].rew_pursuer);
    CHECK(b[i].coverage == a[i + 3].coverage);
  }
  for (const auto& e : fs::directory_iterator(tmp.path / "full" / "checkpoints" / "ckpt_000006")) {
    CHECK(slurp(e.path()) == slurp(tmp.path / "resumed" / "checkpoints" / "ckpt_000006" / e.path().filename()));
  }

  std::string other = text;
  other.replace(other.find("hidden_units = 8"), 16, "hidden_units = 9");
  const auto cfg2 = write_file(tmp.path / "other.ini", other);
  std::string log;
  CHECK(train(cfg2, tmp.path / "bad", &log, mid) != 0);
  CHECK(log.find("different configuration") != std::string::npos);
}

TEST_CASE("output directory precedence") {
  TempDir tmp("outdir");
  auto text = std::string(kSmallConfig);
  text.replace(text.find("episodes = 6"), 12, "episodes = 1");
  text.insert(text.find("[world]"), "output_dir = " + (tmp.path / "from_config").string() + "\n");
  const auto cfg = write_file(tmp.path / "c.ini", text);
  const auto parsed = load_config(cfg);
  CHECK(resolve_output_dir(parsed, std::nullopt) == tmp.path / "from_config");
  setenv(kOutputDirEnv, (tmp.path / "from_env").c_str(), 1);
  CHECK(resolve_output_dir(parsed, std::nullopt) == tmp.path / "from_env");
  CHECK(resolve_output_dir(parsed, tmp.path / "flag") == tmp.path / "flag");

  TrainOptions o;
  o.config_path = cfg;
  std::ostringstream so, se;
  REQUIRE(cmd_train(o, so, se) == 0);
  CHECK(fs::exists(tmp.path / "from_env" / "aggregate.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "from_config"));
  unsetenv(kOutputDirEnv);
}

TEST_CASE("eval prints the distance table and is deterministic") {
  TempDir tmp("eval");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  REQUIRE(train(cfg, tmp.path / "out") == 0);
  auto run = [&](const fs::path& ckpt, const fs::path& csv) {
    EvalOptions o;
    o.checkpoint_dir = ckpt;
    o.episodes = 4;
    o.seed = 11;
    o.out = csv;
    std::ostringstream so, se;
    REQUIRE(cmd_eval(o, so, se) == 0);
    return so.str();
  };
  const auto ckpt = tmp.path / "out" / "checkpoints" / "ckpt_000006";
  const auto a = run(ckpt, tmp.path / "e1.csv");
  const auto b = run(ckpt, tmp.path / "e2.csv");
  CHECK(a == b);
  CHECK(slurp(tmp.path / "e1.csv") == slurp(tmp.path / "e2.csv"));
  const std::regex table(
      R"(^ *mean of min dist \| +mean of ave dist \| +mean of max dist\n +\d+\.\d{4} \| +\d+\.\d{4} \| +\d+\.\d{4}\n)");
  CHECK(std::regex_search(a, table));

  // The untrained initial checkpoint evaluates to finite distances.
  const auto init = run(tmp.path / "out" / "checkpoints" / "ckpt_000000", tmp.path / "e0.csv");
  std::ifstream is(tmp.path / "e0.csv");
  for (const auto& r : metrics::read_aggregate_csv(is)) CHECK(std::isfinite(r.avg_d));

  EvalOptions missing;
  missing.checkpoint_dir = tmp.path / "nope";
  std::ostringstream so, se;
  CHECK(cmd_eval(missing, so, se) != 0);
}

TEST_CASE("eval rejects a checkpoint that does not match its configuration") {
  TempDir tmp("mismatch");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  REQUIRE(train(cfg, tmp.path / "out") == 0);
  const auto ckpt = tmp.path / "out" / "checkpoints" / "ckpt_000006";
  fs::remove(ckpt / "agent_005.spnn");
  EvalOptions o;
  o.checkpoint_dir = ckpt;
  std::ostringstream so, se;
  CHECK(cmd_eval(o, so, se) != 0);
  CHECK_FALSE(se.str().empty());
}

TEST_CASE("sweep with a single pursuer count") {
  TempDir tmp("sweep");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  SweepOptions o;
  o.config_path = cfg;
  o.min_pursuers = 2;
  o.max_pursuers = 2;
  o.out = tmp.path / "out";
  std::ostringstream so, se;
  REQUIRE(cmd_sweep_pursuers(o, so, se) == 0);
  const auto csv = slurp(tmp.path / "out" / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind("n_pursuers,mean_min_d\n2,", 0) == 0);
  CHECK(so.str().find("[sweep]") != std::string::npos);
  CHECK(so.str().find("0.5 m") != std::string::npos);
}

TEST_CASE("sweep flags non-monotone cells and runs cells in parallel") {
  TempDir tmp("sweep_many");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  SweepOptions o;
  o.config_path = cfg;
  o.min_pursuers = 2;
  o.max_pursuers = 4;
  o.out = tmp.path / "seq";
  o.tolerance = -1e9;  // every rise, or even a fall, counts as a violation
  std::ostringstream so, se;
  REQUIRE(cmd_sweep_pursuers(o, so, se) == 0);
  CHECK(so.str().find("[monotonicity] n_p=3") != std::string::npos);
  CHECK(so.str().find("[monotonicity] n_p=4") != std::string::npos);

  o.out = tmp.path / "par";
  o.jobs = 3;
  o.tolerance = 0.0;
  std::ostringstream so2, se2;
  REQUIRE(cmd_sweep_pursuers(o, so2, se2) == 0);
  CHECK(slurp(tmp.path / "seq" / "sweep.csv") == slurp(tmp.path / "par" / "sweep.csv"));

  // Fewer pursuers than the two evaders is an invalid cell.
  o.min_pursuers = 1;
  std::ostringstream so3, se3;
  CHECK(cmd_sweep_pursuers(o, so3, se3) != 0);
  CHECK(se3.str().find("n_p=1") != std::string::npos);
}

TEST_CASE("replay renders an empty log as the arena only") {
  const auto svg = render_trajectory_svg({}, {}, 3.0);
  CHECK(svg.find("class=\"arena\"") != std::string::npos);
  CHECK(svg.find("<polyline") == std::string::npos);
  CHECK(svg.find("<circle") == std::string::npos);
}

TEST_CASE("replay draws a dot for a stationary agent") {
  const std::vector<metrics::StepRow> rows{row(1, 0, env::Role::Scout, 1.0, -1.0), row(2, 0, env::Role::Scout, 1.0, -1.0)};
  const auto svg = render_trajectory_svg(rows, {}, 3.0);
  CHECK(svg.find("class=\"agent-dot\"") != std::string::npos);
  CHECK(svg.find("cx=\"1.0000\" cy=\"-1.0000\"") != std::string::npos);
  CHECK(svg.find("<polyline") == std::string::npos);
}

TEST_CASE("replay colours follow the role column") {
  TempDir tmp("replay");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  REQUIRE(train(cfg, tmp.path / "out") == 0);
  const auto log = tmp.path / "out" / "trajectories" / "episode_000003.csv";
  ReplayOptions o;
  o.log_csv = log;
  o.svg_out = tmp.path / "a.svg";
  std::ostringstream so, se;
  REQUIRE(cmd_replay(o, so, se) == 0);
  o.svg_out = tmp.path / "b.svg";
  REQUIRE(cmd_replay(o, so, se) == 0);
  const auto svg = slurp(tmp.path / "a.svg");
  CHECK(svg == slurp(tmp.path / "b.svg"));

  std::ifstream is(log);
  std::map<std::size_t, env::Role> roles;
  for (const auto& r : metrics::read_step_csv(is)) roles[r.agent_id] = r.role;
  const std::map<std::string, std::string> colour{{"pursuer", "red"}, {"evader", "green"}, {"scout", "blue"}};
  const std::regex mark(R"re(data-agent="(\d+)" data-role="(\w+)"[^>]*(?:stroke|fill)="(\w+)")re");
  std::size_t seen = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), mark); it != std::sregex_iterator(); ++it) {
    const auto id = std::stoul((*it)[1]);
    const std::string role = (*it)[2];
    CHECK(role == env::role_name(roles.at(id)));
    CHECK((*it)[3] == colour.at(role));
    ++seen;
  }
  CHECK(seen == roles.size());
  // Obstacles come from the sidecar file.
  std::size_t obstacles = 0;
  for (std::size_t p = svg.find("class=\"obstacle\""); p != std::string::npos; p = svg.find("class=\"obstacle\"", p + 1)) ++obstacles;
  CHECK(obstacles == 2);
  CHECK(svg.find("fill=\"grey\"") != std::string::npos);
}

TEST_CASE("replay reports malformed rows by line") {
  TempDir tmp("replay_bad");
  const auto bad = write_file(tmp.path / "bad.csv", std::string(metrics::kStepCsvHeader) +
                                                        "\n0,1,0,pursuer,0,0,0,0,0,0,0,0,0,0\n0,1,1,pursuer,0,0\n");
  ReplayOptions o;
  o.log_csv = bad;
  o.svg_out = tmp.path / "x.svg";
  std::ostringstream so, se;
  CHECK(cmd_replay(o, so, se) != 0);
  CHECK(se.str().find("line 3") != std::string::npos);
}

TEST_CASE("coverage report from a log and from a checkpoint") {
  TempDir tmp("coverage");
  const auto cfg = write_file(tmp.path / "c.ini", kSmallConfig);
  REQUIRE(train(cfg, tmp.path / "out") == 0);
  CoverageOptions o;
  o.input = tmp.path / "out" / "trajectories" / "episode_000003.csv";
  std::ostringstream so, se;
  REQUIRE(cmd_coverage_report(o, so, se) == 0);
  CHECK(so.str().find("[coverage] team=team range=0.5 episodes=1") != std::string::npos);

  o.scouts_only = true;
  std::ostringstream so2;
  REQUIRE(cmd_coverage_report(o, so2, se) == 0);
  CHECK(so2.str().find("team=scouts") != std::string::npos);

  o.input = tmp.path / "out" / "checkpoints" / "ckpt_000006";
  o.episodes = 2;
  std::ostringstream so3;
  REQUIRE(cmd_coverage_report(o, so3, se) == 0);
  CHECK(so3.str().find("episodes=2") != std::string::npos);
}
