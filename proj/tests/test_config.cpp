#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pursuit/config.hpp"

using namespace pursuit;
using namespace pursuit::cli;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("presets") {
  const auto mt = preset_config("multi-target");
  CHECK(mt.world.n_pursuers == 5);
  CHECK(mt.world.n_scouts == 0);
  CHECK(mt.world.n_evaders == 2);
  CHECK(mt.world.n_obstacles == 3);
  const auto rb = preset_config("role-based");
  CHECK(rb.world.n_pursuers == 5);
  CHECK(rb.world.n_scouts == 5);
  CHECK(rb.world.n_evaders == 2);
  const auto dd = preset_config("drone-demo");
  CHECK(dd.world.n_pursuers == 2);
  CHECK(dd.world.n_scouts == 3);
  CHECK(dd.world.n_evaders == 1);
  CHECK(preset_names().size() == 3);
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset_config(name).validate());
}

TEST_CASE("keys override the preset regardless of order") {
  const auto c = parse_config("[world]\nn_scouts = 3\n[run]\npreset = role-based\n");
  CHECK(c.preset == "role-based");
  CHECK(c.world.n_scouts == 3);
  CHECK(c.world.n_pursuers == 5);
}

TEST_CASE("round trip through text is the identity") {
  auto c = preset_config("role-based");
  c.world.rng_seed = 123456789012345ULL;
  c.world.damping = 0.1 + 0.2;
  c.rewards.c1 = 1.0 / 3.0;
  c.rewards.target_assignment = rewards::TargetAssignment::AverageAllTargets;
  c.training.optimizer = neural::OptimizerKind::Sgd;
  c.training.save_replay = false;
  c.metrics.coverage_team = metrics::CoverageTeam::ScoutsOnly;
  c.output_dir = "some/where";
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  CHECK(same_config(back, c));
  CHECK(serialize_config(back) == text);
  CHECK(back.world.damping == c.world.damping);
  CHECK(back.rewards.c1 == c.rewards.c1);
}

TEST_CASE("errors name the offending key") {
  CHECK(error_of("[world]\nn_pursuer = 3\n").find("world.n_pursuer") != std::string::npos);
  CHECK(error_of("[rewards]\nc1 = ten\n").find("rewards.c1") != std::string::npos);
  CHECK(error_of("[bogus]\nx = 1\n").find("bogus.x") != std::string::npos);
  CHECK(error_of("[rewards]\ntarget_assignment = closest\n").find("rewards.target_assignment") != std::string::npos);
  CHECK(error_of("[world]\nn_pursuers = 1\n").find("n_pursuers") != std::string::npos);
  CHECK(error_of("[training]\ngamma = 0\n").find("gamma") != std::string::npos);
  CHECK(error_of("[run]\npreset = unknown\n").find("preset") != std::string::npos);
  CHECK(error_of("[world\n").find("line") != std::string::npos);
  CHECK(error_of("[world]\nn_pursuers = 3.5\n").find("world.n_pursuers") != std::string::npos);
  CHECK(error_of("[rewards]\nvoronoi_shared = false\n").find("voronoi_shared") != std::string::npos);
  CHECK(error_of("[world]\nn_pursuers = 4\n").empty());
}

TEST_CASE("loading from disk") {
  CHECK_THROWS_WITH_AS(load_config("/definitely/missing.ini"), doctest::Contains("/definitely/missing.ini"), ConfigError);
  const auto path = std::filesystem::temp_directory_path() / "pursuit_config_test.ini";
  {
    std::ofstream os(path);
    os << "[run]\npreset = drone-demo\n\n[training]\nepisodes = 12\n";
  }
  const auto c = load_config(path);
  CHECK(c.world.n_scouts == 3);
  CHECK(c.training.episodes == 12);
  std::filesystem::remove(path);
}
