#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pursuit/env.hpp"
#include "pursuit/maddpg.hpp"
#include "pursuit/metrics.hpp"
#include "pursuit/rewards.hpp"

namespace pursuit::cli {

/// Raised for unreadable, malformed or invalid run configurations. The
/// message names the offending key where there is one.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string preset = "multi-target";
  std::string output_dir = "runs/default";
  env::WorldConfig world;
  rewards::RewardConfig rewards;
  maddpg::TrainConfig training;
  metrics::MetricsConfig metrics;

  /// Throws ConfigError.
  void validate() const;
};

std::vector<std::string> preset_names();

/// "multi-target" (5 pursuers vs 2 evaders), "role-based" (5 scouts,
/// 5 pursuers vs 2 evaders) or "drone-demo" (3 scouts, 2 pursuers vs 1 evader).
RunConfig preset_config(std::string_view name);

/// Sectioned INI text. `[run] preset` is applied first; every other key then
/// overrides the preset. Unknown sections or keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Writes every key, so parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

bool same_config(const RunConfig& a, const RunConfig& b);

}  // namespace pursuit::cli
