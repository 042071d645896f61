#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pursuit/config.hpp"
#include "pursuit/metrics.hpp"

namespace pursuit::cli {

/// Environment variable that overrides run.output_dir (but not --out).
inline constexpr const char* kOutputDirEnv = "PURSUIT_OUTPUT_DIR";

struct TrainOptions {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> resume;
  /// Write step-level trajectories every N episodes (0: only the last one).
  int trajectory_every = 0;
  int progress_every = 100;
};

struct EvalOptions {
  std::filesystem::path checkpoint_dir;
  int episodes = 50;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out;
  /// Leading evaluation episodes dropped from the printed means.
  int skip = 0;
};

struct SweepOptions {
  std::filesystem::path config_path;
  int min_pursuers = 2;
  int max_pursuers = 6;
  std::optional<std::filesystem::path> out;
  /// Allowed increase of mean min distance from n_p - 1 to n_p before flagging.
  double tolerance = 0.0;
  int jobs = 1;
};

struct ReplayOptions {
  std::filesystem::path log_csv;
  std::filesystem::path svg_out;
  std::optional<std::filesystem::path> obstacles_csv;
  double half_extent = 3.0;
};

struct CoverageOptions {
  std::filesystem::path input;  // checkpoint directory or step CSV
  double sensor_range = 0.5;
  bool scouts_only = false;
  int episodes = 50;
  std::uint64_t seed = 1;
  double half_extent = 3.0;
};

/// Each command returns a process exit status and reports on out/err.
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep_pursuers(const SweepOptions& opts, std::ostream& out, std::ostream& err);
int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err);
int cmd_coverage_report(const CoverageOptions& opts, std::ostream& out, std::ostream& err);

/// Resolves the output directory: --out, then the environment, then config.
std::filesystem::path resolve_output_dir(const RunConfig& config,
                                         const std::optional<std::filesystem::path>& flag);

/// Three-column distance summary: mean of min, ave and max distance.
std::string format_distance_table(double mean_min, double mean_avg, double mean_max);

struct ObstacleRow {
  std::size_t id = 0;
  double x = 0.0, y = 0.0, radius = 0.0;
};

inline constexpr std::string_view kObstacleCsvHeader = "obstacle_id,x,y,radius";

/// Deterministic SVG: arena border, grey obstacle discs, one polyline per
/// agent (red pursuers, green evaders, blue scouts), a dot for agents that
/// never move.
std::string render_trajectory_svg(std::span<const metrics::StepRow> rows,
                                  std::span<const ObstacleRow> obstacles, double half_extent);

}  // namespace pursuit::cli
