#include "pursuit/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <sstream>

namespace pursuit::cli {

namespace {

namespace pt = boost::property_tree;

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected a number");
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected an integer");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false");
}

std::string from_double(double v) { return fmt::format("{}", v); }

struct Key {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key num(std::string section, std::string name, T RunConfig::*group, double T::*field) {
  return {std::move(section), std::move(name),
          [=](RunConfig& c, const std::string& v) { (c.*group).*field = to_double(v); },
          [=](const RunConfig& c) { return from_double((c.*group).*field); }};
}

template <typename T>
Key integer(std::string section, std::string name, T RunConfig::*group, int T::*field) {
  return {std::move(section), std::move(name),
          [=](RunConfig& c, const std::string& v) {
            const long long x = to_int(v);
            if (x < INT32_MIN || x > INT32_MAX) throw std::invalid_argument("integer out of range");
            (c.*group).*field = static_cast<int>(x);
          },
          [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <typename T, typename U>
Key unsigned_key(std::string section, std::string name, T RunConfig::*group, U T::*field) {
  return {std::move(section), std::move(name),
          [=](RunConfig& c, const std::string& v) { (c.*group).*field = static_cast<U>(to_u64(v)); },
          [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

const std::vector<Key>& keys() {
  using env::WorldConfig;
  using maddpg::TrainConfig;
  using metrics::MetricsConfig;
  using rewards::RewardConfig;
  static const std::vector<Key> table = {
      {"run", "preset", [](RunConfig& c, const std::string& v) { c.preset = v; },
       [](const RunConfig& c) { return c.preset; }},
      {"run", "output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir; }},

      num("world", "half_extent", &RunConfig::world, &WorldConfig::half_extent),
      integer("world", "n_pursuers", &RunConfig::world, &WorldConfig::n_pursuers),
      integer("world", "n_scouts", &RunConfig::world, &WorldConfig::n_scouts),
      integer("world", "n_evaders", &RunConfig::world, &WorldConfig::n_evaders),
      num("world", "pursuer_radius", &RunConfig::world, &WorldConfig::pursuer_radius),
      num("world", "scout_radius", &RunConfig::world, &WorldConfig::scout_radius),
      num("world", "evader_radius", &RunConfig::world, &WorldConfig::evader_radius),
      num("world", "pursuer_max_speed", &RunConfig::world, &WorldConfig::pursuer_max_speed),
      num("world", "evader_speed_factor", &RunConfig::world, &WorldConfig::evader_speed_factor),
      num("world", "accel_gain", &RunConfig::world, &WorldConfig::accel_gain),
      num("world", "damping", &RunConfig::world, &WorldConfig::damping),
      num("world", "dt", &RunConfig::world, &WorldConfig::dt),
      integer("world", "episode_length", &RunConfig::world, &WorldConfig::episode_length),
      integer("world", "n_obstacles", &RunConfig::world, &WorldConfig::n_obstacles),
      num("world", "obstacle_radius_min", &RunConfig::world, &WorldConfig::obstacle_radius_min),
      num("world", "obstacle_radius_max", &RunConfig::world, &WorldConfig::obstacle_radius_max),
      unsigned_key("world", "rng_seed", &RunConfig::world, &WorldConfig::rng_seed),

      num("rewards", "c1", &RunConfig::rewards, &RewardConfig::c1),
      num("rewards", "c2", &RunConfig::rewards, &RewardConfig::c2),
      num("rewards", "c3", &RunConfig::rewards, &RewardConfig::c3),
      num("rewards", "catch_bonus", &RunConfig::rewards, &RewardConfig::catch_bonus),
      num("rewards", "caught_penalty", &RunConfig::rewards, &RewardConfig::caught_penalty),
      {"rewards", "target_assignment",
       [](RunConfig& c, const std::string& v) { c.rewards.target_assignment = rewards::parse_assignment(v); },
       [](const RunConfig& c) { return std::string(rewards::assignment_name(c.rewards.target_assignment)); }},
      {"rewards", "voronoi_shared",
       [](RunConfig& c, const std::string& v) { c.rewards.voronoi_shared = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.rewards.voronoi_shared ? "true" : "false"); }},

      num("training", "gamma", &RunConfig::training, &TrainConfig::gamma),
      num("training", "tau", &RunConfig::training, &TrainConfig::tau),
      unsigned_key("training", "batch_size", &RunConfig::training, &TrainConfig::batch_size),
      unsigned_key("training", "buffer_capacity", &RunConfig::training, &TrainConfig::buffer_capacity),
      integer("training", "update_every", &RunConfig::training, &TrainConfig::update_every),
      num("training", "noise_std_start", &RunConfig::training, &TrainConfig::noise_std_start),
      num("training", "noise_std_end", &RunConfig::training, &TrainConfig::noise_std_end),
      num("training", "noise_decay_fraction", &RunConfig::training, &TrainConfig::noise_decay_fraction),
      integer("training", "episodes", &RunConfig::training, &TrainConfig::episodes),
      unsigned_key("training", "seed", &RunConfig::training, &TrainConfig::seed),
      num("training", "actor_lr", &RunConfig::training, &TrainConfig::actor_lr),
      num("training", "critic_lr", &RunConfig::training, &TrainConfig::critic_lr),
      integer("training", "hidden_units", &RunConfig::training, &TrainConfig::hidden_units),
      integer("training", "hidden_layers", &RunConfig::training, &TrainConfig::hidden_layers),
      {"training", "optimizer",
       [](RunConfig& c, const std::string& v) {
         if (v == "adam") {
           c.training.optimizer = neural::OptimizerKind::Adam;
         } else if (v == "sgd") {
           c.training.optimizer = neural::OptimizerKind::Sgd;
         } else {
           throw std::invalid_argument("expected adam or sgd");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.training.optimizer == neural::OptimizerKind::Sgd ? "sgd" : "adam");
       }},
      num("training", "grad_clip", &RunConfig::training, &TrainConfig::grad_clip),
      num("training", "actor_preactivation_reg", &RunConfig::training, &TrainConfig::actor_preactivation_reg),
      integer("training", "checkpoint_every", &RunConfig::training, &TrainConfig::checkpoint_every),
      {"training", "save_replay",
       [](RunConfig& c, const std::string& v) { c.training.save_replay = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.training.save_replay ? "true" : "false"); }},

      num("metrics", "sensor_range", &RunConfig::metrics, &MetricsConfig::sensor_range),
      integer("metrics", "grid_resolution", &RunConfig::metrics, &MetricsConfig::grid_resolution),
      {"metrics", "coverage_team",
       [](RunConfig& c, const std::string& v) { c.metrics.coverage_team = metrics::parse_coverage_team(v); },
       [](const RunConfig& c) { return std::string(metrics::coverage_team_name(c.metrics.coverage_team)); }},
      integer("metrics", "truncate", &RunConfig::metrics, &MetricsConfig::truncate),
  };
  return table;
}

const Key* find_key(const std::string& section, const std::string& name) {
  for (const Key& k : keys()) {
    if (k.section == section && k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  try {
    world.validate();
    rewards.validate();
    training.validate();
    metrics.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
}

std::vector<std::string> preset_names() { return {"multi-target", "role-based", "drone-demo"}; }

RunConfig preset_config(std::string_view name) {
  RunConfig c;
  c.preset = std::string(name);
  if (name == "multi-target") {
    c.world.n_pursuers = 5;
    c.world.n_scouts = 0;
    c.world.n_evaders = 2;
    c.world.n_obstacles = 3;
  } else if (name == "role-based") {
    c.world.n_pursuers = 5;
    c.world.n_scouts = 5;
    c.world.n_evaders = 2;
    c.world.n_obstacles = 3;
  } else if (name == "drone-demo") {
    c.world.n_pursuers = 2;
    c.world.n_scouts = 3;
    c.world.n_evaders = 1;
    c.world.n_obstacles = 0;
  } else {
    throw ConfigError("run.preset: unknown preset '" + std::string(name) + "'");
  }
  return c;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  std::string preset = "multi-target";
  if (auto run = tree.get_child_optional("run")) {
    if (auto p = run->get_optional<std::string>("preset")) preset = *p;
  }
  RunConfig c = preset_config(preset);

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' must be inside a section");
    }
    for (const auto& [name, value] : body) {
      const Key* k = find_key(section, name);
      if (k == nullptr) throw ConfigError("unknown config key '" + section + "." + name + "'");
      try {
        k->set(c, value.data());
      } catch (const std::invalid_argument& e) {
        throw ConfigError("invalid value '" + value.data() + "' for '" + section + "." + name +
                          "': " + e.what());
      }
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const Key& k : keys()) {
    if (k.section != section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

bool same_config(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace pursuit::cli
