#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "pursuit/env.hpp"
#include "pursuit/geometry.hpp"

namespace pursuit::rewards {

enum class TargetAssignment { RoundRobin, NearestGreedy, AverageAllTargets };

std::string_view assignment_name(TargetAssignment a);
TargetAssignment parse_assignment(std::string_view name);

struct RewardConfig {
  double c1 = 10.0;
  double c2 = 10.0;
  double c3 = 10.0;
  double catch_bonus = 20.0;
  double caught_penalty = -10.0;
  TargetAssignment target_assignment = TargetAssignment::RoundRobin;
  /// Every scout receives the same exploration scalar. Only `true` is supported.
  bool voronoi_shared = true;

  void validate() const;
};

/// Per-agent reward components for one step. Components that do not apply to
/// the agent's role stay zero.
struct RewardBreakdown {
  double bounding = 0.0;
  double collision = 0.0;
  double catch_reward = 0.0;
  double distance = 0.0;
  double exploration = 0.0;
  double total = 0.0;
};

/// -min(exp(3|x| - 3h), c1) - min(exp(3|y| - 3h), c2); h = 3 gives the
/// exp(3|x| - 9) form of the 6 m arena.
double bounding_reward(Vec2 position, double c1, double c2, double half_extent = 3.0);

/// -c3 when dist <= r_i + r_j, else 0.
double collision_reward(double dist, double r_i, double r_j, double c3);

/// Sum of collision_reward over every other agent.
double collision_total(std::size_t agent, const env::WorldState& state,
                       const env::StepInfo& info, double c3);

/// Distance term for a pursuer under the configured target assignment;
/// 0 when there are no evaders.
double pursuit_distance_term(std::size_t agent, const env::WorldState& state,
                             const env::StepInfo& info, TargetAssignment assignment);

/// Throw std::invalid_argument when the agent has a different role.
RewardBreakdown pursuer_reward(std::size_t agent, const env::WorldState& state,
                               const env::StepInfo& info, const RewardConfig& cfg);
RewardBreakdown evader_reward(std::size_t agent, const env::WorldState& state,
                              const env::StepInfo& info, const RewardConfig& cfg);
/// The diagram must be built over all agents (one seed per agent).
RewardBreakdown scout_reward(std::size_t agent, const env::WorldState& state,
                             const env::StepInfo& info,
                             const geometry::VoronoiDiagram& diagram,
                             const RewardConfig& cfg);

/// -max cell area of the Voronoi diagram over every agent position.
double exploration_reward(const geometry::VoronoiDiagram& diagram);

struct JointRewards {
  std::vector<RewardBreakdown> agents;
  /// Built only when the world has scouts.
  std::optional<geometry::VoronoiDiagram> diagram;

  std::vector<double> totals() const;
};

JointRewards compute_all_rewards(const env::WorldState& state, const env::StepInfo& info,
                                 const RewardConfig& cfg);

}  // namespace pursuit::rewards
