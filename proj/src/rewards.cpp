#include "pursuit/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pursuit::rewards {

using env::Role;

std::string_view assignment_name(TargetAssignment a) {
  switch (a) {
    case TargetAssignment::RoundRobin: return "round_robin";
    case TargetAssignment::NearestGreedy: return "nearest_greedy";
    case TargetAssignment::AverageAllTargets: return "average_all_targets";
  }
  return "unknown";
}

TargetAssignment parse_assignment(std::string_view name) {
  if (name == "round_robin") return TargetAssignment::RoundRobin;
  if (name == "nearest_greedy") return TargetAssignment::NearestGreedy;
  if (name == "average_all_targets") return TargetAssignment::AverageAllTargets;
  throw std::invalid_argument("unknown target assignment '" + std::string(name) + "'");
}

void RewardConfig::validate() const {
  if (!(c1 > 0)) throw std::invalid_argument("rewards.c1 must be positive");
  if (!(c2 > 0)) throw std::invalid_argument("rewards.c2 must be positive");
  if (!(c3 > 0)) throw std::invalid_argument("rewards.c3 must be positive");
  if (!(catch_bonus > 0)) throw std::invalid_argument("rewards.catch_bonus must be positive");
  if (!(caught_penalty < 0)) throw std::invalid_argument("rewards.caught_penalty must be negative");
  if (!voronoi_shared) {
    throw std::invalid_argument("rewards.voronoi_shared: only the shared exploration reward is supported");
  }
}

double bounding_reward(Vec2 position, double c1, double c2, double half_extent) {
  const double bx = std::min(std::exp(3.0 * std::abs(position.x) - 3.0 * half_extent), c1);
  const double by = std::min(std::exp(3.0 * std::abs(position.y) - 3.0 * half_extent), c2);
  return -bx - by;
}

double collision_reward(double dist, double r_i, double r_j, double c3) {
  return dist <= r_i + r_j ? -c3 : 0.0;
}

double collision_total(std::size_t agent, const env::WorldState& state, const env::StepInfo& info,
                       double c3) {
  double total = 0.0;
  const auto& self = state.agents[agent];
  for (const auto& other : state.agents) {
    if (other.id == self.id) continue;
    total += collision_reward(info.distance(agent, other.id), self.radius, other.radius, c3);
  }
  return total;
}

namespace {

void expect_role(const env::WorldState& state, std::size_t agent, Role role) {
  if (agent >= state.agents.size()) throw std::out_of_range("reward: agent id out of range");
  if (state.agents[agent].role != role) {
    throw std::invalid_argument("reward: agent " + std::to_string(agent) + " is a " +
                                std::string(env::role_name(state.agents[agent].role)) +
                                ", expected " + std::string(env::role_name(role)));
  }
}

bool collided_with_role(std::size_t agent, const env::WorldState& state, const env::StepInfo& info,
                        Role role) {
  return std::any_of(state.agents.begin(), state.agents.end(), [&](const env::AgentState& o) {
    return o.role == role && o.id != agent && info.collided(agent, o.id);
  });
}

// Rank of the agent among agents sharing its role, in id order.
std::size_t rank_in_role(std::size_t agent, const env::WorldState& state) {
  const Role role = state.agents[agent].role;
  std::size_t rank = 0;
  for (std::size_t i = 0; i < agent; ++i) rank += state.agents[i].role == role ? 1 : 0;
  return rank;
}

}  // namespace

double pursuit_distance_term(std::size_t agent, const env::WorldState& state,
                             const env::StepInfo& info, TargetAssignment assignment) {
  std::vector<std::size_t> evaders;
  for (const auto& a : state.agents) {
    if (a.role == Role::Evader) evaders.push_back(a.id);
  }
  if (evaders.empty()) return 0.0;

  switch (assignment) {
    case TargetAssignment::RoundRobin: {
      const std::size_t target = evaders[rank_in_role(agent, state) % evaders.size()];
      return -info.distance(agent, target);
    }
    case TargetAssignment::NearestGreedy: {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t e : evaders) best = std::min(best, info.distance(agent, e));
      return -best;
    }
    case TargetAssignment::AverageAllTargets: {
      double sum = 0.0;
      for (std::size_t e : evaders) sum += info.distance(agent, e);
      return -sum / static_cast<double>(evaders.size());
    }
  }
  return 0.0;
}

RewardBreakdown pursuer_reward(std::size_t agent, const env::WorldState& state,
                               const env::StepInfo& info, const RewardConfig& cfg) {
  expect_role(state, agent, Role::Pursuer);
  RewardBreakdown r;
  r.bounding = bounding_reward(state.agents[agent].position, cfg.c1, cfg.c2, state.half_extent);
  r.collision = collision_total(agent, state, info, cfg.c3);
  r.catch_reward = collided_with_role(agent, state, info, Role::Evader) ? cfg.catch_bonus : 0.0;
  r.distance = pursuit_distance_term(agent, state, info, cfg.target_assignment);
  r.total = r.bounding + r.collision + r.catch_reward + r.distance;
  return r;
}

RewardBreakdown evader_reward(std::size_t agent, const env::WorldState& state,
                              const env::StepInfo& info, const RewardConfig& cfg) {
  expect_role(state, agent, Role::Evader);
  RewardBreakdown r;
  r.bounding = bounding_reward(state.agents[agent].position, cfg.c1, cfg.c2, state.half_extent);
  r.collision = collision_total(agent, state, info, cfg.c3);
  r.catch_reward = collided_with_role(agent, state, info, Role::Pursuer) ? cfg.caught_penalty : 0.0;
  r.total = r.bounding + r.collision + r.catch_reward;
  return r;
}

double exploration_reward(const geometry::VoronoiDiagram& diagram) {
  return -geometry::max_cell_area(diagram);
}

RewardBreakdown scout_reward(std::size_t agent, const env::WorldState& state,
                             const env::StepInfo& info, const geometry::VoronoiDiagram& diagram,
                             const RewardConfig& cfg) {
  expect_role(state, agent, Role::Scout);
  if (diagram.seeds.size() != state.agents.size()) {
    throw std::invalid_argument("scout_reward: diagram has " + std::to_string(diagram.seeds.size()) +
                                " seeds for " + std::to_string(state.agents.size()) + " agents");
  }
  RewardBreakdown r;
  r.bounding = bounding_reward(state.agents[agent].position, cfg.c1, cfg.c2, state.half_extent);
  r.collision = collision_total(agent, state, info, cfg.c3);
  r.exploration = exploration_reward(diagram);
  r.total = r.bounding + r.collision + r.exploration;
  return r;
}

std::vector<double> JointRewards::totals() const {
  std::vector<double> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(a.total);
  return out;
}

JointRewards compute_all_rewards(const env::WorldState& state, const env::StepInfo& info,
                                 const RewardConfig& cfg) {
  JointRewards out;
  out.agents.resize(state.agents.size());
  if (state.count(Role::Scout) > 0) {
    std::vector<Vec2> seeds;
    seeds.reserve(state.agents.size());
    for (const auto& a : state.agents) seeds.push_back(a.position);
    out.diagram = geometry::bounded_voronoi(seeds, state.half_extent);
  }
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    switch (state.agents[i].role) {
      case Role::Pursuer: out.agents[i] = pursuer_reward(i, state, info, cfg); break;
      case Role::Evader: out.agents[i] = evader_reward(i, state, info, cfg); break;
      case Role::Scout: out.agents[i] = scout_reward(i, state, info, *out.diagram, cfg); break;
    }
  }
  return out;
}

}  // namespace pursuit::rewards
