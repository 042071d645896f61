#include "pursuit/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pursuit/random.hpp"

namespace pursuit::env {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::Pursuer: return "pursuer";
    case Role::Scout: return "scout";
    case Role::Evader: return "evader";
  }
  return "unknown";
}

Role parse_role(std::string_view name) {
  if (name == "pursuer") return Role::Pursuer;
  if (name == "scout") return Role::Scout;
  if (name == "evader") return Role::Evader;
  throw std::invalid_argument("unknown role '" + std::string(name) + "'");
}

void WorldConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("world." + what); };
  if (n_pursuers < 0 || n_scouts < 0 || n_evaders < 0) fail("agent counts must be non-negative");
  if (n_agents() == 0) fail("world needs at least one agent");
  if (n_pursuers < n_evaders) fail("n_pursuers must be >= n_evaders");
  if (n_obstacles < 0) fail("n_obstacles must be non-negative");
  if (!(pursuer_radius > 0 && scout_radius > 0 && evader_radius > 0)) fail("radii must be positive");
  const double max_radius = std::max({pursuer_radius, scout_radius, evader_radius,
                                      n_obstacles > 0 ? obstacle_radius_max : 0.0});
  if (!(half_extent > max_radius)) fail("half_extent must exceed every radius");
  if (!(pursuer_max_speed > 0)) fail("pursuer_max_speed must be positive");
  if (!(evader_speed_factor > 0)) fail("evader_speed_factor must be positive");
  if (!(accel_gain >= 0)) fail("accel_gain must be non-negative");
  if (!(damping >= 0 && damping <= 1)) fail("damping must lie in [0, 1]");
  if (!(dt > 0)) fail("dt must be positive");
  if (episode_length < 1) fail("episode_length must be >= 1");
  if (n_obstacles > 0 && !(obstacle_radius_min > 0 && obstacle_radius_max >= obstacle_radius_min)) {
    fail("obstacle radius range must satisfy 0 < min <= max");
  }
}

Role WorldConfig::role_of(std::size_t id) const {
  const auto p = static_cast<std::size_t>(n_pursuers);
  const auto s = static_cast<std::size_t>(n_scouts);
  if (id < p) return Role::Pursuer;
  if (id < p + s) return Role::Scout;
  if (id < n_agents()) return Role::Evader;
  throw std::out_of_range("agent id out of range");
}

double WorldConfig::max_speed(Role role) const {
  return role == Role::Evader ? pursuer_max_speed * evader_speed_factor : pursuer_max_speed;
}

double WorldConfig::radius(Role role) const {
  switch (role) {
    case Role::Pursuer: return pursuer_radius;
    case Role::Scout: return scout_radius;
    case Role::Evader: return evader_radius;
  }
  return pursuer_radius;
}

std::size_t WorldState::count(Role role) const {
  return static_cast<std::size_t>(std::count_if(
      agents.begin(), agents.end(), [role](const AgentState& a) { return a.role == role; }));
}

bool WorldState::operator==(const WorldState& o) const {
  if (half_extent != o.half_extent || step != o.step || agents.size() != o.agents.size() ||
      obstacles.size() != o.obstacles.size()) {
    return false;
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const auto& b = o.agents[i];
    if (a.id != b.id || a.role != b.role || !(a.position == b.position) ||
        !(a.velocity == b.velocity) || a.radius != b.radius || a.max_speed != b.max_speed) {
      return false;
    }
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& a = obstacles[i];
    const auto& b = o.obstacles[i];
    if (a.id != b.id || !(a.center == b.center) || a.radius != b.radius) return false;
  }
  return true;
}

namespace {

// Rescales v so that |v| <= cap holds exactly in floating point.
Vec2 clip_speed(Vec2 v, double cap) {
  double n = v.norm();
  if (n <= cap) return v;
  v *= cap / n;
  while (v.norm() > cap) v *= 1.0 - 0x1.0p-52;
  return v;
}

}  // namespace

ResetResult reset(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  WorldState state;
  state.half_extent = config.half_extent;
  const double h = config.half_extent;

  state.obstacles.reserve(static_cast<std::size_t>(config.n_obstacles));
  for (int k = 0; k < config.n_obstacles; ++k) {
    const double r = rng.uniform(config.obstacle_radius_min, config.obstacle_radius_max);
    bool placed = false;
    for (int attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
      const Vec2 c{rng.uniform(-h + r, h - r), rng.uniform(-h + r, h - r)};
      placed = std::none_of(state.obstacles.begin(), state.obstacles.end(), [&](const Obstacle& o) {
        return distance(c, o.center) <= r + o.radius;
      });
      if (placed) state.obstacles.push_back({static_cast<std::size_t>(k), c, r});
    }
    if (!placed) {
      throw SpawnError("reset: could not place obstacle " + std::to_string(k) + " after " +
                       std::to_string(kSpawnAttempts) + " attempts");
    }
  }

  const std::size_t n = config.n_agents();
  state.agents.reserve(n);
  for (std::size_t id = 0; id < n; ++id) {
    const Role role = config.role_of(id);
    const double r = config.radius(role);
    bool placed = false;
    for (int attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
      const Vec2 p{rng.uniform(-h + r, h - r), rng.uniform(-h + r, h - r)};
      const bool clear_of_obstacles =
          std::none_of(state.obstacles.begin(), state.obstacles.end(),
                       [&](const Obstacle& o) { return distance(p, o.center) <= r + o.radius; });
      const bool clear_of_agents =
          std::none_of(state.agents.begin(), state.agents.end(),
                       [&](const AgentState& a) { return distance(p, a.position) <= r + a.radius; });
      placed = clear_of_obstacles && clear_of_agents;
      if (placed) {
        state.agents.push_back({id, role, p, Vec2{}, r, config.max_speed(role)});
      }
    }
    if (!placed) {
      throw SpawnError("reset: could not place agent " + std::to_string(id) + " after " +
                       std::to_string(kSpawnAttempts) + " attempts");
    }
  }

  ResetResult out;
  out.observations = observe_all(state);
  out.state = std::move(state);
  return out;
}

StepResult step(const WorldConfig& config, const WorldState& state, std::span<const Vec2> actions) {
  if (actions.size() != state.agents.size()) {
    throw std::invalid_argument("step: expected " + std::to_string(state.agents.size()) +
                                " actions, got " + std::to_string(actions.size()));
  }
  for (const Vec2& a : actions) {
    if (!std::isfinite(a.x) || !std::isfinite(a.y)) {
      throw std::invalid_argument("step: non-finite action component");
    }
  }

  StepResult out;
  out.state = state;
  out.state.step = state.step + 1;
  const double retain = 1.0 - config.damping;
  for (std::size_t i = 0; i < out.state.agents.size(); ++i) {
    AgentState& agent = out.state.agents[i];
    const Vec2 a{std::clamp(actions[i].x, -1.0, 1.0), std::clamp(actions[i].y, -1.0, 1.0)};
    agent.velocity = clip_speed(agent.velocity * retain + a * (config.accel_gain * config.dt),
                                agent.max_speed);
    agent.position += agent.velocity * config.dt;

    for (const Obstacle& o : out.state.obstacles) {
      const Vec2 offset = agent.position - o.center;
      const double reach = o.radius + agent.radius;
      const double d = offset.norm();
      if (d >= reach) continue;
      const Vec2 normal = d > 0.0 ? offset * (1.0 / d) : Vec2{1.0, 0.0};
      agent.position = o.center + normal * reach;
      const double inward = dot(agent.velocity, normal);
      if (inward < 0.0) agent.velocity -= normal * inward;
    }
    agent.velocity = clip_speed(agent.velocity, agent.max_speed);
  }

  out.observations = observe_all(out.state);
  out.info = compute_step_info(out.state);
  return out;
}

Observation observe(const WorldState& state, std::size_t agent_id) {
  if (agent_id >= state.agents.size()) throw std::out_of_range("observe: bad agent id");
  const AgentState& self = state.agents[agent_id];
  const std::size_t n = state.agents.size();

  Observation obs;
  obs.reserve(4 + 2 * state.obstacles.size() + 4 * (n - 1));
  obs.push_back(self.velocity.x);
  obs.push_back(self.velocity.y);
  obs.push_back(self.position.x);
  obs.push_back(self.position.y);

  std::vector<std::size_t> order(state.obstacles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return state.obstacles[a].id < state.obstacles[b].id;
  });
  for (std::size_t k : order) {
    const Vec2 rel = state.obstacles[k].center - self.position;
    obs.push_back(rel.x);
    obs.push_back(rel.y);
  }
  for (const AgentState& other : state.agents) {
    if (other.id == self.id) continue;
    const Vec2 rel = other.position - self.position;
    obs.push_back(rel.x);
    obs.push_back(rel.y);
  }
  for (const AgentState& other : state.agents) {
    if (other.id == self.id) continue;
    const bool visible = other.role == Role::Evader;
    obs.push_back(visible ? other.velocity.x : 0.0);
    obs.push_back(visible ? other.velocity.y : 0.0);
  }
  return obs;
}

JointObservation observe_all(const WorldState& state) {
  JointObservation out;
  out.reserve(state.agents.size());
  for (std::size_t i = 0; i < state.agents.size(); ++i) out.push_back(observe(state, i));
  return out;
}

StepInfo compute_step_info(const WorldState& state) {
  StepInfo info;
  const std::size_t n = state.agents.size();
  info.n = n;
  info.distances.assign(n * n, 0.0);
  info.collisions.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = state.agents[i];
      const auto& b = state.agents[j];
      const double d = distance(a.position, b.position);
      const unsigned char hit = d <= a.radius + b.radius ? 1 : 0;
      info.distances[i * n + j] = info.distances[j * n + i] = d;
      info.collisions[i * n + j] = info.collisions[j * n + i] = hit;
    }
  }
  return info;
}

}  // namespace pursuit::env
