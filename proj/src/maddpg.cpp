#include "pursuit/maddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>

namespace pursuit::maddpg {

using neural::Matrix;
using neural::MlpParams;

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("training." + what); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (batch_size == 0) fail("batch_size must be positive");
  if (buffer_capacity == 0) fail("buffer_capacity must be positive");
  if (batch_size > buffer_capacity) fail("batch_size must not exceed buffer_capacity");
  if (update_every < 1) fail("update_every must be >= 1");
  if (!(noise_std_start >= 0.0 && noise_std_end >= 0.0)) fail("noise std must be non-negative");
  if (!(noise_decay_fraction > 0.0 && noise_decay_fraction <= 1.0)) {
    fail("noise_decay_fraction must lie in (0, 1]");
  }
  if (episodes < 0) fail("episodes must be non-negative");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) fail("learning rates must be positive");
  if (hidden_units < 1 || hidden_layers < 0) fail("network shape must be positive");
  if (!(grad_clip >= 0.0)) fail("grad_clip must be non-negative");
  if (!(actor_preactivation_reg >= 0.0)) fail("actor_preactivation_reg must be non-negative");
  if (checkpoint_every < 0) fail("checkpoint_every must be non-negative");
}

double TrainConfig::noise_std(int episode) const {
  const double horizon = noise_decay_fraction * static_cast<double>(std::max(episodes, 1));
  const double frac = std::min(static_cast<double>(episode) / horizon, 1.0);
  return noise_std_start + (noise_std_end - noise_std_start) * frac;
}

std::vector<AgentLearner> make_learners(const env::WorldConfig& world, const TrainConfig& cfg,
                                        Rng& rng) {
  const std::size_t n = world.n_agents();
  const std::size_t obs = world.observation_size();
  const std::size_t critic_in = critic_input_size(n, obs);
  std::vector<std::size_t> actor_dims{obs};
  std::vector<std::size_t> critic_dims{critic_in};
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    actor_dims.push_back(static_cast<std::size_t>(cfg.hidden_units));
    critic_dims.push_back(static_cast<std::size_t>(cfg.hidden_units));
  }
  actor_dims.push_back(2);
  critic_dims.push_back(1);

  std::vector<AgentLearner> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    AgentLearner l;
    l.role = world.role_of(i);
    l.actor = MlpParams::glorot(actor_dims, neural::OutputActivation::Tanh, rng);
    l.critic = MlpParams::glorot(critic_dims, neural::OutputActivation::Identity, rng);
    if (l.critic.input_size() != critic_in) {
      throw std::logic_error("critic input width must equal joint observations + joint actions");
    }
    l.target_actor = l.actor;
    l.target_critic = l.critic;
    l.actor_opt = neural::AdamState::for_params(l.actor, cfg.actor_lr, cfg.optimizer);
    l.critic_opt = neural::AdamState::for_params(l.critic, cfg.critic_lr, cfg.optimizer);
    out.push_back(std::move(l));
  }
  return out;
}

namespace {

Matrix joint_input(const Matrix& obs, const Matrix& actions) {
  Matrix in(obs.rows(), obs.cols() + actions.cols());
  in << obs, actions;
  return in;
}

Matrix target_next_actions(const Batch& batch, std::span<const AgentLearner> learners) {
  Matrix next(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(2 * batch.n_agents));
  for (std::size_t j = 0; j < batch.n_agents; ++j) {
    next.middleCols(static_cast<Eigen::Index>(2 * j), 2) =
        neural::forward(learners[j].target_actor, batch.agent_next_obs(j)).output;
  }
  return next;
}

void check_arity(const Batch& batch, std::size_t n_learners) {
  if (batch.n_agents != n_learners) {
    throw std::invalid_argument("batch agent count does not match learner count");
  }
}

}  // namespace

Matrix td_target(const Batch& batch, std::span<const AgentLearner> learners, std::size_t agent,
                 double gamma) {
  check_arity(batch, learners.size());
  const Matrix next_actions = target_next_actions(batch, learners);
  const Matrix q = neural::forward(learners[agent].target_critic,
                                   joint_input(batch.next_obs, next_actions))
                       .output;
  return batch.rewards.col(static_cast<Eigen::Index>(agent)) + gamma * q;
}

Matrix td_targets(const Batch& batch, std::span<const AgentLearner> learners, double gamma) {
  check_arity(batch, learners.size());
  const Matrix next_actions = target_next_actions(batch, learners);
  const Matrix in = joint_input(batch.next_obs, next_actions);
  Matrix y(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(learners.size()));
  for (std::size_t i = 0; i < learners.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y.col(c) = batch.rewards.col(c) + gamma * neural::forward(learners[i].target_critic, in).output;
  }
  return y;
}

double critic_update(AgentLearner& learner, const Batch& batch, const Matrix& y, double grad_clip) {
  const auto k = static_cast<double>(batch.size());
  const auto cache = neural::forward(learner.critic, joint_input(batch.obs, batch.actions));
  const Matrix diff = cache.output - y;
  const double loss = diff.squaredNorm() / k;
  if (!std::isfinite(loss)) throw NonFiniteError("critic loss is not finite");
  auto grads = neural::backward(learner.critic, cache, diff * (2.0 / k)).params;
  neural::clip_grad_norm(grads, grad_clip);
  if (neural::adam_step(learner.critic, grads, learner.critic_opt) != neural::StepStatus::Applied) {
    throw NonFiniteError("critic gradient is not finite");
  }
  return loss;
}

neural::ParamTensors actor_gradient(std::size_t agent, std::span<const AgentLearner> learners,
                                    const Batch& batch, double* objective, double preactivation_reg) {
  check_arity(batch, learners.size());
  const AgentLearner& self = learners[agent];
  const auto k = static_cast<Eigen::Index>(batch.size());
  const auto actor_cache = neural::forward(self.actor, batch.agent_obs(agent));
  Matrix actions = batch.actions;
  const auto action_col = static_cast<Eigen::Index>(2 * agent);
  actions.middleCols(action_col, 2) = actor_cache.output;
  const auto critic_cache = neural::forward(self.critic, joint_input(batch.obs, actions));
  if (objective != nullptr) *objective = critic_cache.output.mean();

  const Matrix dq = Matrix::Constant(k, 1, -1.0 / static_cast<double>(k));
  const auto critic_grads = neural::backward(self.critic, critic_cache, dq, false);
  const Matrix da = critic_grads.input.middleCols(batch.obs.cols() + action_col, 2);
  const Matrix& z = actor_cache.preactivations.back();
  const Matrix dz = z * (2.0 * preactivation_reg / static_cast<double>(z.size()));
  return neural::backward(self.actor, actor_cache, da, true, &dz).params;
}

double actor_update(std::size_t agent, std::span<AgentLearner> learners, const Batch& batch,
                    double grad_clip, double preactivation_reg) {
  double objective = 0.0;
  auto grads = actor_gradient(agent, learners, batch, &objective, preactivation_reg);
  if (!std::isfinite(objective)) throw NonFiniteError("actor objective is not finite");
  neural::clip_grad_norm(grads, grad_clip);
  AgentLearner& self = learners[agent];
  if (neural::adam_step(self.actor, grads, self.actor_opt) != neural::StepStatus::Applied) {
    throw NonFiniteError("actor gradient is not finite");
  }
  return objective;
}

void soft_update(const MlpParams& live, MlpParams& target, double tau) {
  if (live.layer_dims != target.layer_dims) throw std::invalid_argument("soft_update: shape mismatch");
  auto blend = [tau](const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = tau * src[k] + (1.0 - tau) * dst[k];
  };
  for (std::size_t l = 0; l < live.weights.size(); ++l) {
    blend(live.weights[l], target.weights[l]);
    blend(live.biases[l], target.biases[l]);
  }
}

std::vector<Vec2> select_actions(std::span<const AgentLearner> learners,
                                 const env::JointObservation& observations, double noise_std,
                                 Rng& rng) {
  if (observations.size() != learners.size()) {
    throw std::invalid_argument("select_actions: one observation per agent required");
  }
  std::vector<Vec2> actions;
  actions.reserve(learners.size());
  for (std::size_t i = 0; i < learners.size(); ++i) {
    const auto out = neural::forward(learners[i].actor, observations[i]);
    Vec2 a{out[0], out[1]};
    if (noise_std > 0.0) {
      a.x += noise_std * rng.normal();
      a.y += noise_std * rng.normal();
    }
    actions.push_back({std::clamp(a.x, -1.0, 1.0), std::clamp(a.y, -1.0, 1.0)});
  }
  return actions;
}

// ---- Trainer --------------------------------------------------------------

Trainer::Trainer(env::WorldConfig world, rewards::RewardConfig rewards, TrainConfig train,
                 metrics::MetricsConfig metrics)
    : world_(std::move(world)),
      rewards_(rewards),
      train_(train),
      metrics_(metrics),
      rng_(train.seed),
      buffer_(train.buffer_capacity, world_.n_agents(), world_.observation_size()) {
  world_.validate();
  rewards_.validate();
  train_.validate();
  metrics_.validate();
  learners_ = make_learners(world_, train_, rng_);
}

EpisodeResult Trainer::run_episode(bool keep_rows) {
  const int episode = next_episode_;
  EpisodeResult result;
  metrics::EpisodeRecorder recorder(episode, metrics_, keep_rows);
  auto [state, obs] = env::reset(world_, mix_seed(world_.rng_seed, static_cast<std::uint64_t>(episode)));
  const double noise = train_.noise_std(episode);

  for (int t = 0; t < world_.episode_length; ++t) {
    const auto actions = select_actions(learners_, obs, noise, rng_);
    auto stepped = env::step(world_, state, actions);
    const auto rewards = rewards::compute_all_rewards(stepped.state, stepped.info, rewards_);
    const auto totals = rewards.totals();
    for (std::size_t i = 0; i < totals.size(); ++i) {
      if (!std::isfinite(totals[i])) {
        throw NonFiniteError(fmt::format("non-finite reward at episode {} step {} agent {}", episode,
                                         t + 1, i));
      }
    }
    buffer_.push({obs, actions, totals, stepped.observations});
    recorder.record(stepped.state, rewards);
    state = std::move(stepped.state);
    obs = std::move(stepped.observations);
    ++total_steps_;
    if (total_steps_ % static_cast<std::uint64_t>(train_.update_every) == 0 &&
        buffer_.size() >= train_.batch_size) {
      try {
        update_all(episode, result.updates);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(fmt::format("{} (episode {}, step {})", e.what(), episode, t + 1));
      }
    }
  }
  result.log = recorder.finish();
  ++next_episode_;
  return result;
}

void Trainer::update_all(int episode, std::vector<UpdateRecord>& out) {
  for (std::size_t i = 0; i < learners_.size(); ++i) {
    const Batch batch = buffer_.sample(train_.batch_size, rng_);
    const Matrix y = td_target(batch, learners_, i, train_.gamma);
    UpdateRecord rec;
    rec.episode = episode;
    rec.agent = i;
    try {
      rec.critic_loss = critic_update(learners_[i], batch, y, train_.grad_clip);
      rec.actor_objective = actor_update(i, learners_, batch, train_.grad_clip, train_.actor_preactivation_reg);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(fmt::format("{} for agent {}", e.what(), i));
    }
    soft_update(learners_[i].actor, learners_[i].target_actor, train_.tau);
    soft_update(learners_[i].critic, learners_[i].target_critic, train_.tau);
    out.push_back(rec);
  }
}

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr const char* kManifestFormat = "pursuit-checkpoint-1";

std::string agent_file(std::size_t i) { return fmt::format("agent_{:03d}.spnn", i); }

}  // namespace

void save_learner(const std::filesystem::path& file, const AgentLearner& l) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  neural::write_mlp(os, l.actor, &l.actor_opt);
  neural::write_mlp(os, l.target_actor);
  neural::write_mlp(os, l.critic, &l.critic_opt);
  neural::write_mlp(os, l.target_critic);
}

AgentLearner load_learner(const std::filesystem::path& file, env::Role role) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + file.string());
  AgentLearner l;
  l.role = role;
  auto actor = neural::read_mlp(is);
  auto target_actor = neural::read_mlp(is);
  auto critic = neural::read_mlp(is);
  auto target_critic = neural::read_mlp(is);
  if (!actor.optimizer || !critic.optimizer) {
    throw std::runtime_error(file.string() + ": missing optimizer state");
  }
  l.actor = std::move(actor.net);
  l.actor_opt = std::move(*actor.optimizer);
  l.target_actor = std::move(target_actor.net);
  l.critic = std::move(critic.net);
  l.critic_opt = std::move(*critic.optimizer);
  l.target_critic = std::move(target_critic.net);
  return l;
}

void Trainer::save_checkpoint(const std::filesystem::path& dir, const std::string& config_text) const {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = kManifestFormat;
  manifest["episode"] = next_episode_;
  manifest["total_steps"] = total_steps_;
  manifest["rng_state"] = rng_.serialize();
  manifest["n_agents"] = learners_.size();
  manifest["obs_size"] = world_.observation_size();
  manifest["has_replay"] = train_.save_replay;
  auto agents = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < learners_.size(); ++i) {
    save_learner(dir / agent_file(i), learners_[i]);
    agents.push_back({{"id", i}, {"role", env::role_name(learners_[i].role)}, {"file", agent_file(i)}});
  }
  manifest["agents"] = agents;
  manifest["config"] = config_text;
  if (train_.save_replay) {
    std::ofstream os(dir / "replay.bin", std::ios::binary);
    buffer_.save(os);
  } else {
    std::filesystem::remove(dir / "replay.bin");
  }
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
}

CheckpointManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("no checkpoint manifest in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (j.value("format", "") != kManifestFormat) {
    throw std::runtime_error("unsupported checkpoint format in " + dir.string());
  }
  CheckpointManifest m;
  m.episode = j.at("episode").get<int>();
  m.total_steps = j.at("total_steps").get<std::uint64_t>();
  m.rng_state = j.at("rng_state").get<std::string>();
  m.n_agents = j.at("n_agents").get<std::size_t>();
  m.obs_size = j.at("obs_size").get<std::size_t>();
  m.has_replay = j.at("has_replay").get<bool>();
  m.config_text = j.at("config").get<std::string>();
  return m;
}

std::vector<AgentLearner> load_learners(const std::filesystem::path& dir,
                                        const env::WorldConfig& world) {
  const CheckpointManifest m = read_manifest(dir);
  if (m.n_agents != world.n_agents() || m.obs_size != world.observation_size()) {
    throw std::runtime_error(fmt::format(
        "checkpoint has {} agents with observation size {}, config expects {} and {}", m.n_agents,
        m.obs_size, world.n_agents(), world.observation_size()));
  }
  std::vector<AgentLearner> out;
  for (std::size_t i = 0; i < m.n_agents; ++i) {
    AgentLearner l = load_learner(dir / agent_file(i), world.role_of(i));
    if (l.actor.input_size() != world.observation_size() ||
        l.critic.input_size() != critic_input_size(world.n_agents(), world.observation_size())) {
      throw std::runtime_error("checkpoint network shapes do not match the configuration");
    }
    out.push_back(std::move(l));
  }
  return out;
}

Trainer Trainer::resume(const std::filesystem::path& dir, env::WorldConfig world,
                        rewards::RewardConfig rewards, TrainConfig train,
                        metrics::MetricsConfig metrics) {
  const CheckpointManifest m = read_manifest(dir);
  if (!m.has_replay) {
    throw std::runtime_error("checkpoint " + dir.string() +
                             " has no replay buffer; exact resume is impossible");
  }
  Trainer t(std::move(world), rewards, train, metrics);
  t.learners_ = load_learners(dir, t.world_);
  std::ifstream is(dir / "replay.bin", std::ios::binary);
  if (!is) throw std::runtime_error("cannot read replay buffer in " + dir.string());
  t.buffer_ = ReplayBuffer::load(is);
  if (t.buffer_.capacity() != t.train_.buffer_capacity) {
    throw std::runtime_error("replay buffer capacity does not match the configuration");
  }
  t.rng_.deserialize(m.rng_state);
  t.next_episode_ = m.episode;
  t.total_steps_ = m.total_steps;
  return t;
}

std::vector<metrics::EpisodeLog> evaluate(const env::WorldConfig& world,
                                          const rewards::RewardConfig& rewards,
                                          std::span<const AgentLearner> learners,
                                          const metrics::MetricsConfig& metrics, int episodes,
                                          std::uint64_t seed, bool keep_rows) {
  if (learners.size() != world.n_agents()) {
    throw std::invalid_argument("evaluate: learner count does not match the world");
  }
  Rng unused(0);
  std::vector<metrics::EpisodeLog> logs;
  logs.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  for (int e = 0; e < episodes; ++e) {
    metrics::EpisodeRecorder recorder(e, metrics, keep_rows);
    auto [state, obs] = env::reset(world, mix_seed(seed, static_cast<std::uint64_t>(e)));
    for (int t = 0; t < world.episode_length; ++t) {
      const auto actions = select_actions(learners, obs, 0.0, unused);
      auto stepped = env::step(world, state, actions);
      recorder.record(stepped.state, rewards::compute_all_rewards(stepped.state, stepped.info, rewards));
      state = std::move(stepped.state);
      obs = std::move(stepped.observations);
    }
    logs.push_back(recorder.finish());
  }
  return logs;
}

}  // namespace pursuit::maddpg
