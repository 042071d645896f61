#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pursuit/env.hpp"
#include "pursuit/random.hpp"

using namespace pursuit;
using namespace pursuit::env;

namespace {

WorldState synthetic(std::vector<std::pair<Role, Vec2>> agents, std::vector<Obstacle> obstacles = {}) {
  WorldConfig cfg;
  WorldState s;
  s.half_extent = cfg.half_extent;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    AgentState a;
    a.id = i;
    a.role = agents[i].first;
    a.position = agents[i].second;
    a.radius = cfg.radius(a.role);
    a.max_speed = cfg.max_speed(a.role);
    s.agents.push_back(a);
  }
  s.obstacles = std::move(obstacles);
  return s;
}

std::vector<Vec2> random_actions(Rng& rng, std::size_t n, double scale = 1.5) {
  std::vector<Vec2> a(n);
  for (auto& v : a) v = {rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
  return a;
}

}  // namespace

TEST_CASE("reset is deterministic for a fixed seed") {
  WorldConfig cfg;
  const auto a = reset(cfg, 42);
  const auto b = reset(cfg, 42);
  CHECK(a.state == b.state);
  CHECK(a.observations == b.observations);
  CHECK_FALSE(reset(cfg, 43).state == a.state);
}

TEST_CASE("no obstacles gives an empty obstacle block") {
  WorldConfig cfg;
  cfg.n_obstacles = 0;
  const auto r = reset(cfg, 1);
  CHECK(r.state.obstacles.empty());
  for (const auto& o : r.observations) CHECK(o.size() == 4 + 4 * (cfg.n_agents() - 1));
}

TEST_CASE("13 agents spawn without overlaps and obstacles stay inside the arena") {
  WorldConfig cfg;
  cfg.n_pursuers = 6;
  cfg.n_scouts = 5;
  cfg.n_evaders = 2;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = reset(cfg, seed).state;
    REQUIRE(s.agents.size() == 13);
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
      const auto& a = s.agents[i];
      CHECK(a.velocity == Vec2{});
      CHECK(std::abs(a.position.x) <= cfg.half_extent);
      CHECK(std::abs(a.position.y) <= cfg.half_extent);
      for (std::size_t j = i + 1; j < s.agents.size(); ++j) {
        CHECK(distance(a.position, s.agents[j].position) > a.radius + s.agents[j].radius);
      }
      for (const auto& o : s.obstacles) CHECK(distance(a.position, o.center) > a.radius + o.radius);
    }
    for (const auto& o : s.obstacles) {
      CHECK(std::abs(o.center.x) + o.radius <= cfg.half_extent);
      CHECK(std::abs(o.center.y) + o.radius <= cfg.half_extent);
      CHECK(o.radius >= cfg.obstacle_radius_min);
      CHECK(o.radius <= cfg.obstacle_radius_max);
    }
  }
}

TEST_CASE("over-dense worlds fail to spawn") {
  WorldConfig cfg;
  cfg.half_extent = 0.3;
  cfg.n_pursuers = 20;
  cfg.n_evaders = 1;
  cfg.n_obstacles = 0;
  CHECK_THROWS_AS(reset(cfg, 0), SpawnError);
}

TEST_CASE("config validation") {
  WorldConfig cfg;
  cfg.n_pursuers = 1;
  cfg.n_evaders = 2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = WorldConfig{};
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = WorldConfig{};
  cfg.evader_radius = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = WorldConfig{};
  cfg.half_extent = 0.05;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(WorldConfig{}.validate());
}

TEST_CASE("roles are assigned pursuers, scouts, evaders") {
  WorldConfig cfg;
  cfg.n_pursuers = 2;
  cfg.n_scouts = 3;
  cfg.n_evaders = 1;
  CHECK(cfg.role_of(0) == Role::Pursuer);
  CHECK(cfg.role_of(1) == Role::Pursuer);
  CHECK(cfg.role_of(2) == Role::Scout);
  CHECK(cfg.role_of(4) == Role::Scout);
  CHECK(cfg.role_of(5) == Role::Evader);
  CHECK(parse_role(role_name(Role::Scout)) == Role::Scout);
}

TEST_CASE("zero action at rest is a fixed point") {
  WorldConfig cfg;
  const auto s = synthetic({{Role::Pursuer, {0.3, -1.2}}, {Role::Evader, {2.0, 2.0}}});
  const std::vector<Vec2> zero(2);
  const auto r = step(cfg, s, zero);
  CHECK(r.state.agents[0].position == s.agents[0].position);
  CHECK(r.state.agents[1].position == s.agents[1].position);
  CHECK(r.state.step == 1);
}

TEST_CASE("unit action from rest") {
  WorldConfig cfg;
  const auto s = synthetic({{Role::Pursuer, {0.0, 0.0}}, {Role::Evader, {2.0, 2.0}}});
  const std::vector<Vec2> act{{1.0, 0.0}, {0.0, 0.0}};
  const auto r = step(cfg, s, act);
  const double expected = std::min(cfg.accel_gain * cfg.dt, cfg.pursuer_max_speed);
  CHECK(r.state.agents[0].velocity.x == doctest::Approx(expected).epsilon(1e-15));
  CHECK(r.state.agents[0].velocity.y == 0.0);
  CHECK(r.state.agents[0].position.x == doctest::Approx(expected * cfg.dt).epsilon(1e-15));

  // Out-of-range actions are clipped before use.
  const std::vector<Vec2> big{{7.0, 0.0}, {0.0, 0.0}};
  CHECK(step(cfg, s, big).state.agents[0].velocity == r.state.agents[0].velocity);
}

TEST_CASE("damping removes a fixed fraction of the velocity") {
  WorldConfig cfg;
  auto s = synthetic({{Role::Pursuer, {0.0, 0.0}}, {Role::Evader, {2.0, 2.0}}});
  s.agents[0].velocity = {0.8, 0.0};
  const std::vector<Vec2> zero(2);
  const auto r = step(cfg, s, zero);
  CHECK(r.state.agents[0].velocity.x == doctest::Approx(0.8 * (1.0 - cfg.damping)).epsilon(1e-15));
}

TEST_CASE("pursuer and evader 0.10 m apart collide") {
  const auto s = synthetic({{Role::Pursuer, {0.0, 0.0}}, {Role::Evader, {0.10, 0.0}}});
  const auto info = compute_step_info(s);
  CHECK(info.collided(0, 1));
  CHECK(info.collided(1, 0));
  CHECK_FALSE(info.collided(0, 0));
  CHECK(info.distance(0, 1) == doctest::Approx(0.10));
}

TEST_CASE("step rejects malformed actions") {
  WorldConfig cfg;
  const auto s = synthetic({{Role::Pursuer, {0.0, 0.0}}, {Role::Evader, {2.0, 2.0}}});
  const std::vector<Vec2> one(1);
  CHECK_THROWS_AS(step(cfg, s, one), std::invalid_argument);
  const std::vector<Vec2> bad{{std::nan(""), 0.0}, {0.0, 0.0}};
  CHECK_THROWS_AS(step(cfg, s, bad), std::invalid_argument);
  const std::vector<Vec2> inf{{0.0, 0.0}, {0.0, INFINITY}};
  CHECK_THROWS_AS(step(cfg, s, inf), std::invalid_argument);
}

TEST_CASE("observations use relative coordinates") {
  const auto same = synthetic({{Role::Pursuer, {0.5, 0.5}}, {Role::Evader, {0.5, 0.5}}});
  const auto o = observe(same, 0);
  REQUIRE(o.size() == 8);
  CHECK(o[4] == 0.0);
  CHECK(o[5] == 0.0);

  const auto lone = synthetic({{Role::Pursuer, {-1.0, 0.25}}}, {Obstacle{0, {0.0, 2.25}, 0.3}});
  const auto lo = observe(lone, 0);
  REQUIRE(lo.size() == 6);
  CHECK(lo[4] == 1.0);
  CHECK(lo[5] == 2.0);
}

TEST_CASE("observation layout") {
  auto s = synthetic({{Role::Pursuer, {0.0, 0.0}}, {Role::Scout, {1.0, 0.0}}, {Role::Evader, {0.0, 2.0}}},
                     {Obstacle{0, {-1.0, -1.0}, 0.2}});
  s.agents[0].velocity = {0.1, 0.2};
  s.agents[1].velocity = {0.3, 0.4};
  s.agents[2].velocity = {0.5, 0.6};
  const auto o = observe(s, 0);
  const std::vector<double> expected{0.1, 0.2, 0.0, 0.0, -1.0, -1.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.5, 0.6};
  CHECK(o == expected);
  // The evader sees pursuer and scout positions but no velocities of non-evaders.
  const auto e = observe(s, 2);
  const std::vector<double> expected_e{0.5, 0.6, 0.0, 2.0, -1.0, -3.0, 0.0, -2.0, 1.0, -2.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(e == expected_e);
}

TEST_CASE("obstacle order in observations follows ids") {
  const std::vector<Obstacle> obs{{0, {1.0, 1.0}, 0.2}, {1, {-2.0, 0.5}, 0.3}, {2, {0.0, -2.0}, 0.25}};
  auto reversed = obs;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = synthetic({{Role::Pursuer, {0.1, 0.2}}, {Role::Evader, {2.0, 2.0}}}, obs);
  const auto b = synthetic({{Role::Pursuer, {0.1, 0.2}}, {Role::Evader, {2.0, 2.0}}}, reversed);
  CHECK(observe(a, 0) == observe(b, 0));
  CHECK(observe(a, 1) == observe(b, 1));
}

TEST_CASE("random rollouts respect the speed cap and keep observation length") {
  WorldConfig cfg;
  cfg.n_scouts = 3;
  Rng rng(3);
  for (std::uint64_t ep = 0; ep < 20; ++ep) {
    auto r = reset(cfg, ep);
    const auto len = cfg.observation_size();
    for (int t = 0; t < cfg.episode_length; ++t) {
      auto next = step(cfg, r.state, random_actions(rng, cfg.n_agents()));
      for (const auto& a : next.state.agents) {
        REQUIRE(a.velocity.norm() <= a.max_speed);
        REQUIRE(std::isfinite(a.position.x));
      }
      for (const auto& o : next.observations) {
        REQUIRE(o.size() == len);
        for (double v : o) REQUIRE(std::isfinite(v));
      }
      for (std::size_t i = 0; i < cfg.n_agents(); ++i) {
        for (std::size_t j = 0; j < cfg.n_agents(); ++j) {
          REQUIRE(next.info.collided(i, j) == next.info.collided(j, i));
        }
      }
      r.state = next.state;
    }
  }
}

TEST_CASE("evaders are faster by exactly the speed factor") {
  WorldConfig cfg;
  CHECK(cfg.max_speed(Role::Evader) / cfg.max_speed(Role::Pursuer) == cfg.evader_speed_factor);
  const auto s = reset(cfg, 9).state;
  for (const auto& a : s.agents) {
    if (a.role == Role::Evader) CHECK(a.max_speed == cfg.pursuer_max_speed * cfg.evader_speed_factor);
  }
}

TEST_CASE("agents can leave the arena") {
  WorldConfig cfg;
  auto s = synthetic({{Role::Pursuer, {2.95, 0.0}}, {Role::Evader, {-2.0, 2.0}}});
  const std::vector<Vec2> push{{1.0, 0.0}, {0.0, 0.0}};
  for (int t = 0; t < 5; ++t) s = step(cfg, s, push).state;
  CHECK(s.agents[0].position.x > cfg.half_extent);
}

TEST_CASE("obstacle contact projects onto the surface and removes inward velocity") {
  WorldConfig cfg;
  auto s = synthetic({{Role::Pursuer, {-0.5, 0.0}}, {Role::Evader, {2.0, 2.0}}}, {Obstacle{0, {0.0, 0.0}, 0.3}});
  s.agents[0].velocity = {1.0, 0.0};
  const std::vector<Vec2> push{{1.0, 0.0}, {0.0, 0.0}};
  int contacts = 0;
  for (int t = 0; t < 5; ++t) {
    s = step(cfg, s, push).state;
    const auto& a = s.agents[0];
    CHECK(distance(a.position, Vec2{0.0, 0.0}) >= 0.3 + a.radius - 1e-12);
    if (distance(a.position, Vec2{0.0, 0.0}) <= 0.3 + a.radius + 1e-12) {
      ++contacts;
      const Vec2 normal = a.position * (1.0 / a.position.norm());
      CHECK(dot(a.velocity, normal) >= -1e-12);
    }
  }
  CHECK(contacts > 0);
}

TEST_CASE("fixed actions give identical trajectories") {
  WorldConfig cfg;
  auto run = [&] {
    Rng rng(77);
    auto s = reset(cfg, 5).state;
    std::vector<WorldState> traj;
    for (int t = 0; t < 50; ++t) {
      s = step(cfg, s, random_actions(rng, cfg.n_agents())).state;
      traj.push_back(s);
    }
    return traj;
  };
  CHECK(run() == run());
}
