#include "pursuit/replay_buffer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pursuit::maddpg {

neural::Matrix Batch::agent_obs(std::size_t agent) const {
  return obs.middleCols(static_cast<Eigen::Index>(agent * obs_size),
                        static_cast<Eigen::Index>(obs_size));
}

neural::Matrix Batch::agent_next_obs(std::size_t agent) const {
  return next_obs.middleCols(static_cast<Eigen::Index>(agent * obs_size),
                             static_cast<Eigen::Index>(obs_size));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t n_agents, std::size_t obs_size)
    : capacity_(capacity), n_agents_(n_agents), obs_size_(obs_size) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (n_agents == 0) throw std::invalid_argument("ReplayBuffer: need at least one agent");
}

void ReplayBuffer::push(const Transition& t) {
  const std::size_t n = n_agents_;
  if (t.obs.size() != n || t.actions.size() != n || t.rewards.size() != n || t.next_obs.size() != n) {
    throw std::invalid_argument("ReplayBuffer::push: transition arity does not match " +
                                std::to_string(n) + " agents");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (t.obs[i].size() != obs_size_ || t.next_obs[i].size() != obs_size_) {
      throw std::invalid_argument("ReplayBuffer::push: observation size mismatch");
    }
  }

  const std::size_t slot = cursor_;
  if (size_ < capacity_ && slot == size_) {
    obs_.resize(obs_.size() + joint_obs());
    next_obs_.resize(next_obs_.size() + joint_obs());
    actions_.resize(actions_.size() + 2 * n);
    rewards_.resize(rewards_.size() + n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(t.obs[i].begin(), t.obs[i].end(), obs_.begin() + static_cast<std::ptrdiff_t>(slot * joint_obs() + i * obs_size_));
    std::copy(t.next_obs[i].begin(), t.next_obs[i].end(),
              next_obs_.begin() + static_cast<std::ptrdiff_t>(slot * joint_obs() + i * obs_size_));
    actions_[slot * 2 * n + 2 * i] = t.actions[i].x;
    actions_[slot * 2 * n + 2 * i + 1] = t.actions[i].y;
    rewards_[slot * n + i] = t.rewards[i];
  }
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t slot) const {
  if (slot >= size_) throw std::out_of_range("ReplayBuffer::at: slot out of range");
  Transition t;
  const std::size_t n = n_agents_;
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = obs_.begin() + static_cast<std::ptrdiff_t>(slot * joint_obs() + i * obs_size_);
    const auto no = next_obs_.begin() + static_cast<std::ptrdiff_t>(slot * joint_obs() + i * obs_size_);
    t.obs.emplace_back(o, o + static_cast<std::ptrdiff_t>(obs_size_));
    t.next_obs.emplace_back(no, no + static_cast<std::ptrdiff_t>(obs_size_));
    t.actions.push_back({actions_[slot * 2 * n + 2 * i], actions_[slot * 2 * n + 2 * i + 1]});
    t.rewards.push_back(rewards_[slot * n + i]);
  }
  return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t k, Rng& rng) const {
  if (size_ < k || size_ == 0) {
    throw std::logic_error("ReplayBuffer::sample: buffer holds " + std::to_string(size_) +
                           " transitions, " + std::to_string(k) + " requested");
  }
  std::vector<std::size_t> idx(k);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.index(size_));
  return idx;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
  const auto k = static_cast<Eigen::Index>(slots.size());
  const auto jo = static_cast<Eigen::Index>(joint_obs());
  const auto n = static_cast<Eigen::Index>(n_agents_);
  Batch b;
  b.n_agents = n_agents_;
  b.obs_size = obs_size_;
  b.obs.resize(k, jo);
  b.next_obs.resize(k, jo);
  b.actions.resize(k, 2 * n);
  b.rewards.resize(k, n);
  for (Eigen::Index r = 0; r < k; ++r) {
    const std::size_t s = slots[static_cast<std::size_t>(r)];
    if (s >= size_) throw std::out_of_range("ReplayBuffer::gather: slot out of range");
    std::copy_n(obs_.data() + s * joint_obs(), joint_obs(), b.obs.row(r).data());
    std::copy_n(next_obs_.data() + s * joint_obs(), joint_obs(), b.next_obs.row(r).data());
    std::copy_n(actions_.data() + s * 2 * n_agents_, 2 * n_agents_, b.actions.row(r).data());
    std::copy_n(rewards_.data() + s * n_agents_, n_agents_, b.rewards.row(r).data());
  }
  return b;
}

namespace {

constexpr char kReplayMagic[8] = {'S', 'P', 'R', 'B', '1', 0, 0, 0};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (is.gcount() != 8) throw std::runtime_error("replay buffer: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) put_u64(os, std::bit_cast<std::uint64_t>(x));
}

void get_doubles(std::istream& is, std::vector<double>& v, std::size_t n) {
  v.resize(n);
  for (double& x : v) x = std::bit_cast<double>(get_u64(is));
}

}  // namespace

void ReplayBuffer::save(std::ostream& os) const {
  os.write(kReplayMagic, sizeof kReplayMagic);
  put_u64(os, capacity_);
  put_u64(os, n_agents_);
  put_u64(os, obs_size_);
  put_u64(os, size_);
  put_u64(os, cursor_);
  put_doubles(os, obs_);
  put_doubles(os, actions_);
  put_doubles(os, rewards_);
  put_doubles(os, next_obs_);
  if (!os) throw std::runtime_error("replay buffer: write failed");
}

ReplayBuffer ReplayBuffer::load(std::istream& is) {
  char magic[sizeof kReplayMagic];
  is.read(magic, sizeof magic);
  if (is.gcount() != sizeof magic || !std::equal(magic, magic + sizeof magic, kReplayMagic)) {
    throw std::runtime_error("replay buffer: bad magic");
  }
  const std::size_t capacity = get_u64(is);
  const std::size_t n_agents = get_u64(is);
  const std::size_t obs_size = get_u64(is);
  ReplayBuffer b(capacity, n_agents, obs_size);
  b.size_ = get_u64(is);
  b.cursor_ = get_u64(is);
  if (b.size_ > capacity || b.cursor_ >= capacity) throw std::runtime_error("replay buffer: corrupt header");
  get_doubles(is, b.obs_, b.size_ * n_agents * obs_size);
  get_doubles(is, b.actions_, b.size_ * 2 * n_agents);
  get_doubles(is, b.rewards_, b.size_ * n_agents);
  get_doubles(is, b.next_obs_, b.size_ * n_agents * obs_size);
  return b;
}

}  // namespace pursuit::maddpg
