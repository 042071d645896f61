#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "pursuit/env.hpp"
#include "pursuit/neural.hpp"
#include "pursuit/random.hpp"

namespace pursuit::maddpg {

/// One environment step for every agent.
struct Transition {
  env::JointObservation obs;
  std::vector<Vec2> actions;
  std::vector<double> rewards;
  env::JointObservation next_obs;

  bool operator==(const Transition&) const = default;
};

/// Mini-batch in matrix form, one transition per row. Observations of all
/// agents are concatenated in agent-id order.
struct Batch {
  std::size_t n_agents = 0;
  std::size_t obs_size = 0;
  neural::Matrix obs;       // K x (n_agents * obs_size)
  neural::Matrix actions;   // K x (2 * n_agents)
  neural::Matrix rewards;   // K x n_agents
  neural::Matrix next_obs;  // K x (n_agents * obs_size)

  std::size_t size() const { return static_cast<std::size_t>(obs.rows()); }
  neural::Matrix agent_obs(std::size_t agent) const;
  neural::Matrix agent_next_obs(std::size_t agent) const;
};

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
/// Storage is flat and grows on demand up to the capacity.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t n_agents, std::size_t obs_size);

  /// Throws std::invalid_argument when the arity or observation size is off.
  void push(const Transition& t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t write_cursor() const { return cursor_; }
  std::size_t n_agents() const { return n_agents_; }
  std::size_t obs_size() const { return obs_size_; }

  /// Transition stored in ring slot `slot` (< size()).
  Transition at(std::size_t slot) const;

  /// K slot indices drawn uniformly with replacement. Throws std::logic_error
  /// if the buffer holds fewer than K transitions.
  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const;
  Batch gather(std::span<const std::size_t> slots) const;
  Batch sample(std::size_t k, Rng& rng) const { return gather(sample_indices(k, rng)); }

  void save(std::ostream& os) const;
  static ReplayBuffer load(std::istream& is);

  bool operator==(const ReplayBuffer&) const = default;

 private:
  std::size_t joint_obs() const { return n_agents_ * obs_size_; }

  std::size_t capacity_;
  std::size_t n_agents_;
  std::size_t obs_size_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<double> obs_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_obs_;
};

}  // namespace pursuit::maddpg
