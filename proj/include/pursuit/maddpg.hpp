#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pursuit/env.hpp"
#include "pursuit/metrics.hpp"
#include "pursuit/neural.hpp"
#include "pursuit/random.hpp"
#include "pursuit/replay_buffer.hpp"
#include "pursuit/rewards.hpp"

namespace pursuit::maddpg {

struct TrainConfig {
  double gamma = 0.95;
  double tau = 0.01;
  std::size_t batch_size = 1024;
  std::size_t buffer_capacity = 1'000'000;
  int update_every = 100;
  double noise_std_start = 0.3;
  double noise_std_end = 0.05;
  /// Fraction of the run over which the noise decays linearly.
  double noise_decay_fraction = 0.5;
  int episodes = 3000;
  std::uint64_t seed = 0;
  double actor_lr = 0.01;
  double critic_lr = 0.01;
  int hidden_units = 64;
  int hidden_layers = 2;
  neural::OptimizerKind optimizer = neural::OptimizerKind::Adam;
  /// Global gradient-norm cap per update; 0 disables clipping.
  double grad_clip = 0.5;
  /// Weight of the mean squared actor pre-activation added to the actor loss.
  double actor_preactivation_reg = 1e-3;
  /// Checkpoint period in episodes; 0 writes only the initial and final ones.
  int checkpoint_every = 0;
  /// Store the replay buffer in checkpoints (required for exact resume).
  bool save_replay = true;

  void validate() const;
  /// Exploration noise for a 0-based episode index.
  double noise_std(int episode) const;
};

/// Live and target networks of one agent.
struct AgentLearner {
  env::Role role = env::Role::Pursuer;
  neural::MlpParams actor;
  neural::MlpParams target_actor;
  neural::MlpParams critic;
  neural::MlpParams target_critic;
  neural::AdamState actor_opt;
  neural::AdamState critic_opt;

  bool operator==(const AgentLearner&) const = default;
};

/// Raised when a loss or gradient stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Joint observations plus joint actions.
constexpr std::size_t critic_input_size(std::size_t n_agents, std::size_t obs_size) {
  return n_agents * obs_size + 2 * n_agents;
}

/// Fresh learners with target networks equal to the live ones.
std::vector<AgentLearner> make_learners(const env::WorldConfig& world, const TrainConfig& cfg,
                                        Rng& rng);

/// y = r_i + gamma * Q'_i(O', A') where every a'_j comes from agent j's
/// target actor on its own next observation. Returns K x 1.
neural::Matrix td_target(const Batch& batch, std::span<const AgentLearner> learners,
                         std::size_t agent, double gamma);

/// td_target for every agent; K x n_agents.
neural::Matrix td_targets(const Batch& batch, std::span<const AgentLearner> learners, double gamma);

/// One optimizer step on the live critic towards y (K x 1). Returns the
/// mean-squared TD error before the step.
double critic_update(AgentLearner& learner, const Batch& batch, const neural::Matrix& y,
                     double grad_clip = 0.0);

/// Gradient of -mean_j Q_i(O_j, A_j | a_i = mu_i(o_i)) + reg * mean(z^2) with
/// respect to the actor parameters of `agent`, where z is the actor's output
/// pre-activation over the batch; other agents' actions come from the batch.
/// Writes the mean Q into *objective when non-null.
neural::ParamTensors actor_gradient(std::size_t agent, std::span<const AgentLearner> learners,
                                    const Batch& batch, double* objective = nullptr,
                                    double preactivation_reg = 0.0);

/// One optimizer step on the actor of `agent` (its critic stays frozen).
/// Returns the mean Q estimate before the step.
double actor_update(std::size_t agent, std::span<AgentLearner> learners, const Batch& batch,
                    double grad_clip = 0.0, double preactivation_reg = 0.0);

/// target <- tau * live + (1 - tau) * target, elementwise.
void soft_update(const neural::MlpParams& live, neural::MlpParams& target, double tau);

/// a_i = clip(mu_i(o_i) + N(0, noise_std^2), -1, 1). Each action depends only
/// on that agent's own observation. No randomness is drawn when noise_std == 0.
std::vector<Vec2> select_actions(std::span<const AgentLearner> learners,
                                 const env::JointObservation& observations, double noise_std,
                                 Rng& rng);

struct UpdateRecord {
  int episode = 0;
  std::size_t agent = 0;
  double critic_loss = 0.0;
  double actor_objective = 0.0;

  bool operator==(const UpdateRecord&) const = default;
};

struct EpisodeResult {
  metrics::EpisodeLog log;
  std::vector<UpdateRecord> updates;
};

/// Sequential, deterministic training loop over the joint space of all roles.
class Trainer {
 public:
  Trainer(env::WorldConfig world, rewards::RewardConfig rewards, TrainConfig train,
          metrics::MetricsConfig metrics);

  int next_episode() const { return next_episode_; }
  bool done() const { return next_episode_ >= train_.episodes; }
  std::uint64_t total_steps() const { return total_steps_; }

  EpisodeResult run_episode(bool keep_rows = false);

  const std::vector<AgentLearner>& learners() const { return learners_; }
  std::vector<AgentLearner>& learners() { return learners_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const Rng& rng() const { return rng_; }

  /// Writes manifest.json, one agent_NNN.spnn per agent and (optionally)
  /// replay.bin. `config_text` is stored verbatim in the manifest.
  void save_checkpoint(const std::filesystem::path& dir, const std::string& config_text) const;

  /// Restores a trainer saved by save_checkpoint. Throws std::runtime_error
  /// when the checkpoint lacks a replay buffer or does not match the configs.
  static Trainer resume(const std::filesystem::path& dir, env::WorldConfig world,
                        rewards::RewardConfig rewards, TrainConfig train,
                        metrics::MetricsConfig metrics);

 private:
  void update_all(int episode, std::vector<UpdateRecord>& out);

  env::WorldConfig world_;
  rewards::RewardConfig rewards_;
  TrainConfig train_;
  metrics::MetricsConfig metrics_;
  Rng rng_;
  std::vector<AgentLearner> learners_;
  ReplayBuffer buffer_;
  int next_episode_ = 0;
  std::uint64_t total_steps_ = 0;
};

struct CheckpointManifest {
  int episode = 0;
  std::uint64_t total_steps = 0;
  std::string rng_state;
  std::size_t n_agents = 0;
  std::size_t obs_size = 0;
  bool has_replay = false;
  std::string config_text;
};

CheckpointManifest read_manifest(const std::filesystem::path& dir);

/// Loads learners only (evaluation). Throws std::runtime_error when the
/// checkpoint does not match the world configuration.
std::vector<AgentLearner> load_learners(const std::filesystem::path& dir,
                                        const env::WorldConfig& world);

void save_learner(const std::filesystem::path& file, const AgentLearner& learner);
AgentLearner load_learner(const std::filesystem::path& file, env::Role role);

/// Noise-free rollouts; never mutates the learners. Episode k resets with
/// mix_seed(seed, k).
std::vector<metrics::EpisodeLog> evaluate(const env::WorldConfig& world,
                                          const rewards::RewardConfig& rewards,
                                          std::span<const AgentLearner> learners,
                                          const metrics::MetricsConfig& metrics, int episodes,
                                          std::uint64_t seed, bool keep_rows = false);

}  // namespace pursuit::maddpg
