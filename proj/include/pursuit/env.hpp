#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "pursuit/vec2.hpp"

namespace pursuit::env {

enum class Role : std::uint8_t { Pursuer, Scout, Evader };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

/// Static description of a world. Radii and lengths in metres, speeds in m/s.
struct WorldConfig {
  double half_extent = 3.0;
  int n_pursuers = 5;
  int n_scouts = 0;
  int n_evaders = 2;
  double pursuer_radius = 0.075;
  double scout_radius = 0.075;
  double evader_radius = 0.05;
  double pursuer_max_speed = 1.0;
  double evader_speed_factor = 1.3;
  double accel_gain = 5.0;
  /// Fraction of velocity lost per step.
  double damping = 0.25;
  double dt = 0.1;
  int episode_length = 50;
  int n_obstacles = 3;
  double obstacle_radius_min = 0.2;
  double obstacle_radius_max = 0.4;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;

  std::size_t n_agents() const {
    return static_cast<std::size_t>(n_pursuers + n_scouts + n_evaders);
  }
  /// 4 own-state entries + 2 per obstacle + 4 per other agent
  /// (relative position and evader-only velocity).
  std::size_t observation_size() const {
    return 4 + 2 * static_cast<std::size_t>(n_obstacles) + 4 * (n_agents() - 1);
  }
  /// Agent ids are assigned pursuers first, then scouts, then evaders.
  Role role_of(std::size_t id) const;
  double max_speed(Role role) const;
  double radius(Role role) const;
};

struct AgentState {
  std::size_t id = 0;
  Role role = Role::Pursuer;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.0;
  double max_speed = 0.0;
};

struct Obstacle {
  std::size_t id = 0;
  Vec2 center;
  double radius = 0.0;
};

struct WorldState {
  double half_extent = 3.0;
  int step = 0;
  std::vector<AgentState> agents;
  std::vector<Obstacle> obstacles;

  std::size_t count(Role role) const;
  bool operator==(const WorldState&) const;
};

using Observation = std::vector<double>;
using JointObservation = std::vector<Observation>;

/// Pairwise quantities for one world state.
struct StepInfo {
  std::size_t n = 0;
  std::vector<double> distances;     // n x n, row-major
  std::vector<unsigned char> collisions;  // n x n, dist <= r_i + r_j, diagonal 0

  double distance(std::size_t i, std::size_t j) const { return distances[i * n + j]; }
  bool collided(std::size_t i, std::size_t j) const { return collisions[i * n + j] != 0; }
};

struct ResetResult {
  WorldState state;
  JointObservation observations;
};

struct StepResult {
  WorldState state;
  JointObservation observations;
  StepInfo info;
};

/// Raised when rejection sampling cannot place an entity.
class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSpawnAttempts = 1000;

ResetResult reset(const WorldConfig& config, std::uint64_t seed);

/// Advances every agent by one step. Actions are clipped to [-1, 1]^2.
/// Throws std::invalid_argument on a wrong action count or non-finite action.
StepResult step(const WorldConfig& config, const WorldState& state,
                std::span<const Vec2> actions);

Observation observe(const WorldState& state, std::size_t agent_id);
JointObservation observe_all(const WorldState& state);

StepInfo compute_step_info(const WorldState& state);

}  // namespace pursuit::env
