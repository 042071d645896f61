#include "pursuit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "pursuit/geometry.hpp"

namespace pursuit::metrics {

using env::Role;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string_view coverage_team_name(CoverageTeam t) {
  return t == CoverageTeam::ScoutsOnly ? "scouts" : "team";
}

CoverageTeam parse_coverage_team(std::string_view name) {
  if (name == "team") return CoverageTeam::PursuersAndScouts;
  if (name == "scouts") return CoverageTeam::ScoutsOnly;
  throw std::invalid_argument("unknown coverage team '" + std::string(name) + "'");
}

void MetricsConfig::validate() const {
  if (!(sensor_range > 0)) throw std::invalid_argument("metrics.sensor_range must be positive");
  if (grid_resolution < 100) throw std::invalid_argument("metrics.grid_resolution must be >= 100");
  if (truncate < 0) throw std::invalid_argument("metrics.truncate must be non-negative");
}

DistanceStats distance_stats(const env::WorldState& state) {
  DistanceStats s{std::numeric_limits<double>::infinity(), 0.0, -std::numeric_limits<double>::infinity()};
  std::size_t pairs = 0;
  for (const auto& p : state.agents) {
    if (p.role != Role::Pursuer) continue;
    for (const auto& e : state.agents) {
      if (e.role != Role::Evader) continue;
      const double d = distance(p.position, e.position);
      s.min = std::min(s.min, d);
      s.max = std::max(s.max, d);
      s.avg += d;
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("distance_stats: need at least one pursuer and one evader");
  s.avg /= static_cast<double>(pairs);
  return s;
}

double truncated_mean(std::span<const double> series, std::size_t skip) {
  if (series.size() <= skip) {
    throw std::invalid_argument("truncated_mean: series of length " + std::to_string(series.size()) +
                                " is too short to skip " + std::to_string(skip));
  }
  double sum = 0.0;
  for (std::size_t i = skip; i < series.size(); ++i) sum += series[i];
  return sum / static_cast<double>(series.size() - skip);
}

namespace {

bool in_team(Role role, CoverageTeam team) {
  if (team == CoverageTeam::ScoutsOnly) return role == Role::Scout;
  return role == Role::Pursuer || role == Role::Scout;
}

}  // namespace

double team_coverage(const env::WorldState& state, const MetricsConfig& cfg) {
  std::vector<Vec2> positions;
  for (const auto& a : state.agents) {
    if (in_team(a.role, cfg.coverage_team)) positions.push_back(a.position);
  }
  return geometry::coverage_fraction(positions, cfg.sensor_range, state.half_extent,
                                     cfg.grid_resolution);
}

EpisodeRecorder::EpisodeRecorder(int episode, MetricsConfig cfg, bool keep_rows)
    : episode_(episode), cfg_(cfg), keep_rows_(keep_rows) {}

void EpisodeRecorder::record(const env::WorldState& state, const rewards::JointRewards& rewards) {
  if (rewards.agents.size() != state.agents.size()) {
    throw std::invalid_argument("EpisodeRecorder: reward count does not match agent count");
  }
  if (returns_.empty()) {
    returns_.assign(state.agents.size(), 0.0);
    for (const auto& a : state.agents) roles_.push_back(a.role);
    has_distance_ = state.count(Role::Pursuer) > 0 && state.count(Role::Evader) > 0;
  }
  ++steps_;
  if (has_distance_) {
    const DistanceStats d = distance_stats(state);
    sum_min_ += d.min;
    sum_avg_ += d.avg;
    sum_max_ += d.max;
  }
  sum_cov_ += team_coverage(state, cfg_);
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    returns_[i] += rewards.agents[i].total;
    if (keep_rows_) {
      const auto& a = state.agents[i];
      rows_.push_back({episode_, state.step, a.id, a.role, a.position.x, a.position.y, a.velocity.x,
                       a.velocity.y, rewards.agents[i]});
    }
  }
}

EpisodeLog EpisodeRecorder::finish() const {
  EpisodeLog log;
  log.episode = episode_;
  log.rows = rows_;
  EpisodeAggregate& a = log.aggregate;
  a.episode = episode_;
  const double n = static_cast<double>(steps_);
  if (steps_ > 0 && has_distance_) {
    a.min_d = sum_min_ / n;
    a.avg_d = sum_avg_ / n;
    a.max_d = sum_max_ / n;
  } else {
    a.min_d = a.avg_d = a.max_d = kNaN;
  }
  a.coverage = steps_ > 0 ? sum_cov_ / n : 0.0;
  auto role_mean = [&](Role role) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < returns_.size(); ++i) {
      if (roles_[i] == role) {
        sum += returns_[i];
        ++count;
      }
    }
    return count > 0 ? sum / count : kNaN;
  };
  a.rew_pursuer = role_mean(Role::Pursuer);
  a.rew_scout = role_mean(Role::Scout);
  a.rew_evader = role_mean(Role::Evader);
  return log;
}

namespace {

// Groups step-major rows into world snapshots (positions and velocities only).
std::vector<env::WorldState> snapshots(std::span<const StepRow> rows, double half_extent) {
  std::map<int, env::WorldState> by_step;
  for (const StepRow& r : rows) {
    env::WorldState& s = by_step[r.step];
    s.half_extent = half_extent;
    s.step = r.step;
    env::AgentState a;
    a.id = r.agent_id;
    a.role = r.role;
    a.position = {r.x, r.y};
    a.velocity = {r.vx, r.vy};
    s.agents.push_back(a);
  }
  std::vector<env::WorldState> out;
  out.reserve(by_step.size());
  for (auto& [step, s] : by_step) {
    std::sort(s.agents.begin(), s.agents.end(),
              [](const env::AgentState& a, const env::AgentState& b) { return a.id < b.id; });
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

EpisodeAggregate aggregate_from_rows(std::span<const StepRow> rows, int episode,
                                     const MetricsConfig& cfg, double half_extent) {
  EpisodeAggregate a;
  a.episode = episode;
  const auto states = snapshots(rows, half_extent);
  double smin = 0, savg = 0, smax = 0, scov = 0;
  bool has_distance = false;
  for (const auto& s : states) {
    has_distance = s.count(Role::Pursuer) > 0 && s.count(Role::Evader) > 0;
    if (has_distance) {
      const DistanceStats d = distance_stats(s);
      smin += d.min;
      savg += d.avg;
      smax += d.max;
    }
    scov += team_coverage(s, cfg);
  }
  const double n = static_cast<double>(states.size());
  if (!states.empty() && has_distance) {
    a.min_d = smin / n;
    a.avg_d = savg / n;
    a.max_d = smax / n;
  } else {
    a.min_d = a.avg_d = a.max_d = kNaN;
  }
  a.coverage = states.empty() ? 0.0 : scov / n;

  std::map<std::size_t, std::pair<Role, double>> returns;
  for (const StepRow& r : rows) {
    auto& [role, ret] = returns[r.agent_id];
    role = r.role;
    ret += r.reward.total;
  }
  auto role_mean = [&](Role role) {
    double sum = 0.0;
    int count = 0;
    for (const auto& [id, rr] : returns) {
      if (rr.first == role) {
        sum += rr.second;
        ++count;
      }
    }
    return count > 0 ? sum / count : kNaN;
  };
  a.rew_pursuer = role_mean(Role::Pursuer);
  a.rew_scout = role_mean(Role::Scout);
  a.rew_evader = role_mean(Role::Evader);
  return a;
}

std::vector<double> coverage_series(std::span<const EpisodeLog> logs, double sensor_range,
                                    CoverageTeam team, double half_extent, int grid_resolution) {
  MetricsConfig cfg;
  cfg.sensor_range = sensor_range;
  cfg.coverage_team = team;
  cfg.grid_resolution = grid_resolution;
  std::vector<double> out;
  out.reserve(logs.size());
  for (const EpisodeLog& log : logs) {
    const auto states = snapshots(log.rows, half_extent);
    double sum = 0.0;
    for (const auto& s : states) sum += team_coverage(s, cfg);
    out.push_back(states.empty() ? 0.0 : sum / static_cast<double>(states.size()));
  }
  return out;
}

// ---- CSV ------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

void write_step_rows(std::ostream& os, std::span<const StepRow> rows) {
  std::string line;
  for (const StepRow& r : rows) {
    line = fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.episode, r.step, r.agent_id,
                       env::role_name(r.role), format_double(r.x), format_double(r.y),
                       format_double(r.vx), format_double(r.vy), format_double(r.reward.bounding),
                       format_double(r.reward.collision), format_double(r.reward.catch_reward),
                       format_double(r.reward.distance), format_double(r.reward.exploration),
                       format_double(r.reward.total));
    os << line;
  }
}

void write_aggregate_row(std::ostream& os, const EpisodeAggregate& a) {
  os << fmt::format("{},{},{},{},{},{},{},{}\n", a.episode, format_double(a.min_d),
                    format_double(a.avg_d), format_double(a.max_d), format_double(a.coverage),
                    format_double(a.rew_pursuer), format_double(a.rew_scout),
                    format_double(a.rew_evader));
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad number");
  return v;
}

long long parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad integer");
  return v;
}

template <typename Row, typename ParseFn>
std::vector<Row> read_csv(std::istream& is, std::string_view header, std::size_t n_fields,
                          ParseFn&& parse) {
  std::vector<Row> out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + why);
  };
  if (!std::getline(is, line)) {
    line_no = 1;
    fail("missing header");
  }
  line_no = 1;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) fail("unexpected header '" + line + "'");
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_fields) {
      fail("expected " + std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
    }
    try {
      out.push_back(parse(fields));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<StepRow> read_step_csv(std::istream& is) {
  return read_csv<StepRow>(is, kStepCsvHeader, 14, [](const std::vector<std::string_view>& f) {
    StepRow r;
    r.episode = static_cast<int>(parse_int(f[0]));
    r.step = static_cast<int>(parse_int(f[1]));
    const long long id = parse_int(f[2]);
    if (id < 0) throw std::invalid_argument("negative agent id");
    r.agent_id = static_cast<std::size_t>(id);
    r.role = env::parse_role(f[3]);
    r.x = parse_double(f[4]);
    r.y = parse_double(f[5]);
    r.vx = parse_double(f[6]);
    r.vy = parse_double(f[7]);
    r.reward.bounding = parse_double(f[8]);
    r.reward.collision = parse_double(f[9]);
    r.reward.catch_reward = parse_double(f[10]);
    r.reward.distance = parse_double(f[11]);
    r.reward.exploration = parse_double(f[12]);
    r.reward.total = parse_double(f[13]);
    return r;
  });
}

std::vector<EpisodeAggregate> read_aggregate_csv(std::istream& is) {
  return read_csv<EpisodeAggregate>(is, kAggregateCsvHeader, 8,
                                    [](const std::vector<std::string_view>& f) {
                                      EpisodeAggregate a;
                                      a.episode = static_cast<int>(parse_int(f[0]));
                                      a.min_d = parse_double(f[1]);
                                      a.avg_d = parse_double(f[2]);
                                      a.max_d = parse_double(f[3]);
                                      a.coverage = parse_double(f[4]);
                                      a.rew_pursuer = parse_double(f[5]);
                                      a.rew_scout = parse_double(f[6]);
                                      a.rew_evader = parse_double(f[7]);
                                      return a;
                                    });
}

}  // namespace pursuit::metrics
