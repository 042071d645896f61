#include "pursuit/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "pursuit/maddpg.hpp"
#include "pursuit/random.hpp"

namespace pursuit::cli {

namespace fs = std::filesystem;
using metrics::EpisodeAggregate;

fs::path resolve_output_dir(const RunConfig& config, const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return config.output_dir;
}

std::string format_distance_table(double mean_min, double mean_avg, double mean_max) {
  return fmt::format("{:>16} | {:>16} | {:>16}\n{:>16.4f} | {:>16.4f} | {:>16.4f}\n",
                     "mean of min dist", "mean of ave dist", "mean of max dist", mean_min, mean_avg,
                     mean_max);
}

namespace {

std::string checkpoint_name(int episode) { return fmt::format("ckpt_{:06d}", episode); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

void write_obstacles(const fs::path& p, const env::WorldState& state) {
  auto os = open_out(p);
  os << kObstacleCsvHeader << '\n';
  for (const auto& o : state.obstacles) {
    os << fmt::format("{},{},{},{}\n", o.id, metrics::format_double(o.center.x),
                      metrics::format_double(o.center.y), metrics::format_double(o.radius));
  }
}

std::vector<ObstacleRow> read_obstacles(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::vector<ObstacleRow> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kObstacleCsvHeader) throw std::runtime_error(p.string() + " line 1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    ObstacleRow r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ls >> r.id >> c1 >> r.x >> c2 >> r.y >> c3 >> r.radius) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw std::runtime_error(p.string() + " line " + std::to_string(line_no) + ": malformed obstacle row");
    }
    out.push_back(r);
  }
  return out;
}

double nan_safe_truncated_mean(const std::vector<double>& v, std::size_t skip) {
  if (v.size() <= skip) return std::nan("");
  return metrics::truncated_mean(v, skip);
}

struct Column {
  std::vector<double> min_d, avg_d, max_d, coverage, pursuer, scout, evader;
  void add(const EpisodeAggregate& a) {
    min_d.push_back(a.min_d);
    avg_d.push_back(a.avg_d);
    max_d.push_back(a.max_d);
    coverage.push_back(a.coverage);
    pursuer.push_back(a.rew_pursuer);
    scout.push_back(a.rew_scout);
    evader.push_back(a.rew_evader);
  }
};

RunConfig config_from_checkpoint(const fs::path& dir) {
  return parse_config(maddpg::read_manifest(dir).config_text);
}

}  // namespace

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = load_config(opts.config_path);
    if (opts.seed) {
      cfg.training.seed = *opts.seed;
      cfg.world.rng_seed = *opts.seed;
    }
    cfg.validate();
    const fs::path dir = resolve_output_dir(cfg, opts.out);
    const std::string config_text = serialize_config(cfg);

    std::optional<maddpg::Trainer> trainer;
    if (opts.resume) {
      const RunConfig saved = config_from_checkpoint(*opts.resume);
      if (!same_config(saved, cfg)) {
        err << "error: checkpoint " << opts.resume->string()
            << " was written with a different configuration\n";
        return 2;
      }
      trainer.emplace(maddpg::Trainer::resume(*opts.resume, cfg.world, cfg.rewards, cfg.training, cfg.metrics));
    } else {
      trainer.emplace(cfg.world, cfg.rewards, cfg.training, cfg.metrics);
    }

    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "trajectories");
    {
      auto os = open_out(dir / "config.ini");
      os << config_text;
    }
    auto aggregate_os = open_out(dir / "aggregate.csv");
    aggregate_os << metrics::kAggregateCsvHeader << '\n';
    auto losses_os = open_out(dir / "losses.csv");
    losses_os << "episode,agent,critic_loss,actor_objective\n";

    std::vector<std::string> checkpoints;
    auto checkpoint = [&] {
      const std::string name = checkpoint_name(trainer->next_episode());
      if (std::find(checkpoints.begin(), checkpoints.end(), name) != checkpoints.end()) return;
      trainer->save_checkpoint(dir / "checkpoints" / name, config_text);
      checkpoints.push_back(name);
    };
    if (!opts.resume) checkpoint();

    const int episodes = cfg.training.episodes;
    std::vector<std::string> trajectories;
    while (!trainer->done()) {
      const int e = trainer->next_episode();
      const bool last = e + 1 == episodes;
      const bool keep = last || (opts.trajectory_every > 0 && e % opts.trajectory_every == 0);
      const maddpg::EpisodeResult r = trainer->run_episode(keep);
      metrics::write_aggregate_row(aggregate_os, r.log.aggregate);
      for (const auto& u : r.updates) {
        losses_os << fmt::format("{},{},{},{}\n", u.episode, u.agent, metrics::format_double(u.critic_loss),
                                 metrics::format_double(u.actor_objective));
      }
      if (keep) {
        const std::string stem = fmt::format("episode_{:06d}", e);
        auto os = open_out(dir / "trajectories" / (stem + ".csv"));
        os << metrics::kStepCsvHeader << '\n';
        metrics::write_step_rows(os, r.log.rows);
        const auto reset = env::reset(cfg.world, mix_seed(cfg.world.rng_seed, static_cast<std::uint64_t>(e)));
        write_obstacles(dir / "trajectories" / (stem + ".obstacles.csv"), reset.state);
        trajectories.push_back(stem + ".csv");
      }
      if ((opts.progress_every > 0 && (e + 1) % opts.progress_every == 0) || last) {
        double loss = 0.0, q = 0.0;
        for (const auto& u : r.updates) {
          loss += u.critic_loss;
          q += u.actor_objective;
        }
        const double n = std::max<std::size_t>(r.updates.size(), 1);
        const auto& a = r.log.aggregate;
        out << fmt::format(
            "[progress] episode={} min_d={:.4f} avg_d={:.4f} max_d={:.4f} coverage={:.4f} "
            "rew_pursuer={:.3f} rew_scout={:.3f} rew_evader={:.3f} critic_loss={:.4f} actor_q={:.4f}\n",
            e + 1, a.min_d, a.avg_d, a.max_d, a.coverage, a.rew_pursuer, a.rew_scout, a.rew_evader,
            loss / n, q / n);
        out.flush();
      }
      if (cfg.training.checkpoint_every > 0 && trainer->next_episode() % cfg.training.checkpoint_every == 0) {
        checkpoint();
      }
    }
    checkpoint();

    nlohmann::ordered_json manifest;
    manifest["config"] = "config.ini";
    manifest["aggregate_csv"] = "aggregate.csv";
    manifest["losses_csv"] = "losses.csv";
    manifest["episodes"] = episodes;
    manifest["seed"] = cfg.training.seed;
    manifest["resumed_from"] = opts.resume ? opts.resume->string() : "";
    manifest["checkpoints"] = checkpoints;
    manifest["final_checkpoint"] = "checkpoints/" + checkpoints.back();
    manifest["trajectories"] = trajectories;
    auto os = open_out(dir / "run_manifest.json");
    os << manifest.dump(2) << '\n';
    out << "[done] output=" << dir.string() << " checkpoint=" << (dir / "checkpoints" / checkpoints.back()).string()
        << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const maddpg::NonFiniteError& e) {
    err << "error: training aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = config_from_checkpoint(opts.checkpoint_dir);
    const auto learners = maddpg::load_learners(opts.checkpoint_dir, cfg.world);
    const auto logs = maddpg::evaluate(cfg.world, cfg.rewards, learners, cfg.metrics, opts.episodes, opts.seed);

    const fs::path csv = opts.out.value_or(opts.checkpoint_dir / "eval_aggregate.csv");
    auto os = open_out(csv);
    os << metrics::kAggregateCsvHeader << '\n';
    Column col;
    for (const auto& log : logs) {
      metrics::write_aggregate_row(os, log.aggregate);
      col.add(log.aggregate);
    }
    const auto skip = static_cast<std::size_t>(std::max(opts.skip, 0));
    out << format_distance_table(nan_safe_truncated_mean(col.min_d, skip),
                                 nan_safe_truncated_mean(col.avg_d, skip),
                                 nan_safe_truncated_mean(col.max_d, skip));
    out << fmt::format("coverage={:.4f} rew_pursuer={:.3f} rew_scout={:.3f} rew_evader={:.3f}\n",
                       nan_safe_truncated_mean(col.coverage, skip), nan_safe_truncated_mean(col.pursuer, skip),
                       nan_safe_truncated_mean(col.scout, skip), nan_safe_truncated_mean(col.evader, skip));
    return 0;
  } catch (const ConfigError& e) {
    err << "error: checkpoint configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_sweep_pursuers(const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.min_pursuers < 1 || opts.max_pursuers < opts.min_pursuers) {
      err << "error: need 1 <= --min <= --max\n";
      return 2;
    }
    const RunConfig base = load_config(opts.config_path);
    const fs::path dir = resolve_output_dir(base, opts.out);
    fs::create_directories(dir);
    const auto skip = static_cast<std::size_t>(base.metrics.truncate);
    if (static_cast<std::size_t>(base.training.episodes) <= skip) {
      throw ConfigError("metrics.truncate must be smaller than training.episodes for a sweep");
    }

    std::vector<int> cells;
    for (int np = opts.min_pursuers; np <= opts.max_pursuers; ++np) cells.push_back(np);
    std::vector<std::vector<EpisodeAggregate>> results(cells.size());
    std::vector<std::string> errors(cells.size());

    auto run_cell = [&](std::size_t k) {
      try {
        RunConfig c = base;
        c.world.n_pursuers = cells[k];
        c.world.n_scouts = 0;
        c.world.n_evaders = 2;
        c.training.seed = base.training.seed + static_cast<std::uint64_t>(cells[k]);
        c.world.rng_seed = base.world.rng_seed + static_cast<std::uint64_t>(cells[k]);
        c.validate();
        maddpg::Trainer t(c.world, c.rewards, c.training, c.metrics);
        while (!t.done()) results[k].push_back(t.run_episode(false).log.aggregate);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    };
    const std::size_t jobs = static_cast<std::size_t>(std::max(opts.jobs, 1));
    for (std::size_t start = 0; start < cells.size(); start += jobs) {
      std::vector<std::thread> pool;
      for (std::size_t k = start; k < std::min(start + jobs, cells.size()); ++k) pool.emplace_back(run_cell, k);
      for (auto& th : pool) th.join();
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (!errors[k].empty()) {
        err << "error: n_p=" << cells[k] << ": " << errors[k] << '\n';
        return 1;
      }
    }

    auto table = open_out(dir / "sweep.csv");
    table << "n_pursuers,mean_min_d\n";
    out << fmt::format("{:>10} | {:>12}\n", "n_p", "mean min d");
    std::optional<int> sufficient;
    double previous = std::nan("");
    const double threshold = base.metrics.sensor_range;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      auto cell_os = open_out(dir / fmt::format("sweep_np{}_aggregate.csv", cells[k]));
      cell_os << metrics::kAggregateCsvHeader << '\n';
      std::vector<double> mins;
      for (const auto& a : results[k]) {
        metrics::write_aggregate_row(cell_os, a);
        mins.push_back(a.min_d);
      }
      const double value = metrics::truncated_mean(mins, skip);
      table << cells[k] << ',' << metrics::format_double(value) << '\n';
      out << fmt::format("{:>10} | {:>12.4f}\n", cells[k], value);
      if (!std::isnan(previous) && value > previous + opts.tolerance) {
        out << fmt::format("[monotonicity] n_p={} mean min distance rose from {:.4f} to {:.4f}\n", cells[k],
                           previous, value);
      }
      if (!sufficient && value < threshold) sufficient = cells[k];
      previous = value;
    }
    if (sufficient) {
      out << fmt::format("[sweep] smallest n_p with mean min distance < {} m: {}\n", threshold, *sufficient);
    } else {
      out << fmt::format("[sweep] no n_p reached mean min distance < {} m\n", threshold);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string render_trajectory_svg(std::span<const metrics::StepRow> rows,
                                  std::span<const ObstacleRow> obstacles, double half_extent) {
  const double h = half_extent;
  const double view = h + 0.5;
  auto num = [](double v) { return fmt::format("{:.4f}", v); };
  auto colour = [](env::Role r) {
    switch (r) {
      case env::Role::Pursuer: return "red";
      case env::Role::Evader: return "green";
      case env::Role::Scout: return "blue";
    }
    return "black";
  };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"600\" height=\"600\">\n",
      num(-view), num(-view), num(2 * view), num(2 * view));
  svg += "<g transform=\"scale(1,-1)\">\n";
  svg += fmt::format(
      "<rect class=\"arena\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\" "
      "stroke-width=\"0.02\"/>\n",
      num(-h), num(-h), num(2 * h), num(2 * h));
  for (const auto& o : obstacles) {
    svg += fmt::format("<circle class=\"obstacle\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"grey\"/>\n", num(o.x),
                       num(o.y), num(o.radius));
  }

  // (episode, agent) -> rows in step order
  std::map<std::pair<int, std::size_t>, std::vector<const metrics::StepRow*>> tracks;
  for (const auto& r : rows) tracks[{r.episode, r.agent_id}].push_back(&r);
  for (auto& [key, track] : tracks) {
    std::stable_sort(track.begin(), track.end(),
                     [](const metrics::StepRow* a, const metrics::StepRow* b) { return a->step < b->step; });
    const env::Role role = track.front()->role;
    const bool stationary = std::all_of(track.begin(), track.end(), [&](const metrics::StepRow* r) {
      return r->x == track.front()->x && r->y == track.front()->y;
    });
    if (stationary) {
      svg += fmt::format(
          "<circle class=\"agent-dot\" data-episode=\"{}\" data-agent=\"{}\" data-role=\"{}\" cx=\"{}\" cy=\"{}\" "
          "r=\"0.06\" fill=\"{}\"/>\n",
          key.first, key.second, env::role_name(role), num(track.front()->x), num(track.front()->y), colour(role));
      continue;
    }
    std::string points;
    for (const auto* r : track) {
      if (!points.empty()) points += ' ';
      points += num(r->x) + "," + num(r->y);
    }
    svg += fmt::format(
        "<polyline class=\"agent\" data-episode=\"{}\" data-agent=\"{}\" data-role=\"{}\" fill=\"none\" "
        "stroke=\"{}\" stroke-width=\"0.03\" points=\"{}\"/>\n",
        key.first, key.second, env::role_name(role), colour(role), points);
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream is(opts.log_csv);
    if (!is) {
      err << "error: cannot read '" << opts.log_csv.string() << "'\n";
      return 1;
    }
    std::vector<metrics::StepRow> rows;
    try {
      rows = metrics::read_step_csv(is);
    } catch (const std::runtime_error& e) {
      err << "error: " << opts.log_csv.string() << ": " << e.what() << '\n';
      return 2;
    }
    std::vector<ObstacleRow> obstacles;
    fs::path sidecar = opts.log_csv;
    sidecar.replace_extension(".obstacles.csv");
    if (opts.obstacles_csv) {
      obstacles = read_obstacles(*opts.obstacles_csv);
    } else if (fs::exists(sidecar)) {
      obstacles = read_obstacles(sidecar);
    }
    auto os = open_out(opts.svg_out);
    os << render_trajectory_svg(rows, obstacles, opts.half_extent);
    out << "[replay] wrote " << opts.svg_out.string() << " (" << rows.size() << " rows)\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_coverage_report(const CoverageOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const auto team = opts.scouts_only ? metrics::CoverageTeam::ScoutsOnly : metrics::CoverageTeam::PursuersAndScouts;
    std::vector<double> series;
    if (fs::is_directory(opts.input)) {
      RunConfig cfg = config_from_checkpoint(opts.input);
      cfg.metrics.sensor_range = opts.sensor_range;
      cfg.metrics.coverage_team = team;
      cfg.metrics.validate();
      const auto learners = maddpg::load_learners(opts.input, cfg.world);
      for (const auto& log : maddpg::evaluate(cfg.world, cfg.rewards, learners, cfg.metrics, opts.episodes, opts.seed)) {
        series.push_back(log.aggregate.coverage);
      }
    } else {
      std::ifstream is(opts.input);
      if (!is) {
        err << "error: cannot read '" << opts.input.string() << "'\n";
        return 1;
      }
      const auto rows = metrics::read_step_csv(is);
      std::map<int, metrics::EpisodeLog> by_episode;
      for (const auto& r : rows) {
        by_episode[r.episode].episode = r.episode;
        by_episode[r.episode].rows.push_back(r);
      }
      std::vector<metrics::EpisodeLog> logs;
      for (auto& [e, log] : by_episode) logs.push_back(std::move(log));
      series = metrics::coverage_series(logs, opts.sensor_range, team, opts.half_extent);
    }
    out << "episode,coverage\n";
    for (std::size_t i = 0; i < series.size(); ++i) out << i << ',' << metrics::format_double(series[i]) << '\n';
    const double mean = series.empty() ? 0.0 : metrics::truncated_mean(series, 0);
    out << fmt::format("[coverage] team={} range={} episodes={} mean={:.4f}\n", metrics::coverage_team_name(team),
                       opts.sensor_range, series.size(), mean);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pursuit::cli
