#include <CLI11.hpp>
#include <iostream>

#include "pursuit/commands.hpp"

int main(int argc, char** argv) {
  using namespace pursuit::cli;
  CLI::App app{"Role-based MADDPG pursuit-evasion trainer"};
  app.require_subcommand(1);

  TrainOptions train;
  std::uint64_t train_seed = 0;
  std::string train_out, train_resume;
  auto* t = app.add_subcommand("train", "train agents from a config file");
  t->add_option("--config", train.config_path, "INI config")->required()->check(CLI::ExistingFile);
  auto* seed_opt = t->add_option("--seed", train_seed, "override world and training seeds");
  auto* out_opt = t->add_option("--out", train_out, "output directory");
  auto* resume_opt = t->add_option("--resume", train_resume, "checkpoint directory to resume from")
                         ->check(CLI::ExistingDirectory);
  t->add_option("--trajectory-every", train.trajectory_every, "write a step CSV every N episodes");
  t->add_option("--progress-every", train.progress_every, "progress line every N episodes");

  EvalOptions eval;
  std::string eval_out;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint without exploration noise");
  e->add_option("--checkpoint", eval.checkpoint_dir, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--episodes", eval.episodes)->check(CLI::PositiveNumber);
  e->add_option("--seed", eval.seed);
  auto* eval_out_opt = e->add_option("--out", eval_out, "aggregate CSV path");
  e->add_option("--skip", eval.skip, "leading episodes excluded from the means")->check(CLI::NonNegativeNumber);

  SweepOptions sweep;
  std::string sweep_out;
  auto* s = app.add_subcommand("sweep-pursuers", "train one cell per pursuer count");
  s->add_option("--config", sweep.config_path)->required()->check(CLI::ExistingFile);
  s->add_option("--min", sweep.min_pursuers);
  s->add_option("--max", sweep.max_pursuers);
  auto* sweep_out_opt = s->add_option("--out", sweep_out);
  s->add_option("--tolerance", sweep.tolerance, "allowed rise before a monotonicity flag");
  s->add_option("--jobs", sweep.jobs)->check(CLI::PositiveNumber);

  ReplayOptions replay;
  std::string replay_obstacles;
  auto* r = app.add_subcommand("replay", "render a step CSV as SVG");
  r->add_option("--log", replay.log_csv)->required();
  r->add_option("--svg", replay.svg_out)->required();
  auto* obstacles_opt = r->add_option("--obstacles", replay_obstacles, "obstacle CSV (defaults to the sidecar)");
  r->add_option("--half-extent", replay.half_extent)->check(CLI::PositiveNumber);

  CoverageOptions coverage;
  auto* c = app.add_subcommand("coverage-report", "team coverage per episode");
  c->add_option("input", coverage.input, "checkpoint directory or step CSV")->required()->check(CLI::ExistingPath);
  c->add_option("--sensor-range", coverage.sensor_range)->check(CLI::PositiveNumber);
  c->add_flag("--scouts", coverage.scouts_only, "count scouts only");
  c->add_option("--episodes", coverage.episodes)->check(CLI::PositiveNumber);
  c->add_option("--seed", coverage.seed);
  c->add_option("--half-extent", coverage.half_extent)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex);
  }

  if (t->parsed()) {
    if (*seed_opt) train.seed = train_seed;
    if (*out_opt) train.out = train_out;
    if (*resume_opt) train.resume = train_resume;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (e->parsed()) {
    if (*eval_out_opt) eval.out = eval_out;
    return cmd_eval(eval, std::cout, std::cerr);
  }
  if (s->parsed()) {
    if (*sweep_out_opt) sweep.out = sweep_out;
    return cmd_sweep_pursuers(sweep, std::cout, std::cerr);
  }
  if (r->parsed()) {
    if (*obstacles_opt) replay.obstacles_csv = replay_obstacles;
    return cmd_replay(replay, std::cout, std::cerr);
  }
  return cmd_coverage_report(coverage, std::cout, std::cerr);
}
