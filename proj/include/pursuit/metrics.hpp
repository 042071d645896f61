#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pursuit/env.hpp"
#include "pursuit/rewards.hpp"

namespace pursuit::metrics {

/// Which agents count towards the sensory-coverage metric.
enum class CoverageTeam { PursuersAndScouts, ScoutsOnly };

std::string_view coverage_team_name(CoverageTeam t);
CoverageTeam parse_coverage_team(std::string_view name);

struct MetricsConfig {
  double sensor_range = 0.5;
  int grid_resolution = 300;
  CoverageTeam coverage_team = CoverageTeam::PursuersAndScouts;
  /// Leading episodes dropped by truncated means.
  int truncate = 2000;

  void validate() const;
};

struct DistanceStats {
  double min = 0.0;
  double avg = 0.0;
  double max = 0.0;
};

/// Min/mean/max over all pursuer-evader pairs. Scouts are ignored.
/// Throws std::invalid_argument without at least one pursuer and one evader.
DistanceStats distance_stats(const env::WorldState& state);

/// Mean of series[skip:]. Throws std::invalid_argument if series.size() <= skip.
double truncated_mean(std::span<const double> series, std::size_t skip);

/// Coverage of the team's positions at one step.
double team_coverage(const env::WorldState& state, const MetricsConfig& cfg);

struct StepRow {
  int episode = 0;
  int step = 0;
  std::size_t agent_id = 0;
  env::Role role = env::Role::Pursuer;
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
  rewards::RewardBreakdown reward;
};

struct EpisodeAggregate {
  int episode = 0;
  double min_d = 0.0;
  double avg_d = 0.0;
  double max_d = 0.0;
  double coverage = 0.0;
  /// Mean per-agent episode return of each role; NaN when the role is absent.
  double rew_pursuer = 0.0;
  double rew_scout = 0.0;
  double rew_evader = 0.0;
};

struct EpisodeLog {
  int episode = 0;
  std::vector<StepRow> rows;  // step-major, agent-minor
  EpisodeAggregate aggregate;
};

/// Accumulates one episode step by step.
class EpisodeRecorder {
 public:
  EpisodeRecorder(int episode, MetricsConfig cfg, bool keep_rows = true);

  void record(const env::WorldState& state, const rewards::JointRewards& rewards);
  EpisodeLog finish() const;

 private:
  int episode_;
  MetricsConfig cfg_;
  bool keep_rows_;
  int steps_ = 0;
  double sum_min_ = 0.0, sum_avg_ = 0.0, sum_max_ = 0.0, sum_cov_ = 0.0;
  bool has_distance_ = false;
  std::vector<double> returns_;
  std::vector<env::Role> roles_;
  std::vector<StepRow> rows_;
};

/// Recomputes the aggregate of one episode from its raw rows.
EpisodeAggregate aggregate_from_rows(std::span<const StepRow> rows, int episode,
                                     const MetricsConfig& cfg, double half_extent);

/// Per-episode mean coverage recomputed from the logged positions.
std::vector<double> coverage_series(std::span<const EpisodeLog> logs, double sensor_range,
                                    CoverageTeam team = CoverageTeam::PursuersAndScouts,
                                    double half_extent = 3.0, int grid_resolution = 300);

// ---- CSV ------------------------------------------------------------------

inline constexpr std::string_view kStepCsvHeader =
    "episode,step,agent_id,role,x,y,vx,vy,r_bound,r_coll,r_catch,r_dist,r_explore,r_total";
inline constexpr std::string_view kAggregateCsvHeader =
    "episode,min_d,avg_d,max_d,coverage,rew_pursuer,rew_scout,rew_evader";

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

void write_step_rows(std::ostream& os, std::span<const StepRow> rows);
void write_aggregate_row(std::ostream& os, const EpisodeAggregate& a);

/// Both parsers expect the header line and throw std::runtime_error naming
/// the 1-based line number of the first malformed line.
std::vector<StepRow> read_step_csv(std::istream& is);
std::vector<EpisodeAggregate> read_aggregate_csv(std::istream& is);

}  // namespace pursuit::metrics
