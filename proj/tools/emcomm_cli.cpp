// Command-line front end for the embodied-communication laboratory.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emcomm/runner.hpp"
#include "emcomm/util.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string scale;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (key = value lines)");
  cmd->add_option("--out", opts.out_dir, "output directory (default: $EMCOMM_OUT_ROOT or ./out)");
  cmd->add_option("--seed", opts.seed, "root seed override")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--scale", opts.scale, "preset: full or desk");
}

emcomm::ExperimentConfig load_config(const CommonOpts& opts) {
  emcomm::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = emcomm::parse_config(emcomm::read_text_file(opts.config_path));
  if (!opts.scale.empty()) {
    cfg.scale = opts.scale;
    if (opts.scale == "desk") cfg = emcomm::apply_desk_preset(cfg);
  }
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

int run_and_report(const emcomm::ExperimentConfig& cfg) {
  const emcomm::RunSummary rs = emcomm::run_experiment(cfg);
  std::printf("%s", rs.report.c_str());
  std::printf("artifacts: %s\n", rs.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emcomm: emergent non-verbal communication experiments"};
  app.require_subcommand(1);

  CommonOpts train_opts, pretrain_opts, cp_opts, obs_opts, discrete_opts, grid_opts, export_opts;

  CLI::App* train_sp = app.add_subcommand("train-sp", "train a self-play population and evaluate");
  add_common(train_sp, train_opts);

  CLI::App* pretrain = app.add_subcommand(
      "pretrain-energy", "torque-curriculum pretraining followed by self-play (curriculum on)");
  add_common(pretrain, pretrain_opts);

  CLI::App* eval_cp = app.add_subcommand("eval-crossplay", "train a population, cross-play only");
  add_common(eval_cp, cp_opts);

  CLI::App* eval_obs =
      app.add_subcommand("eval-observer", "train a population, external-observer cells only");
  add_common(eval_obs, obs_opts);
  std::string cells = "all";
  eval_obs->add_option("--cells", cells, "observer cells, e.g. tau:tau,phi:phi (default all)");

  CLI::App* run_discrete = app.add_subcommand("run-discrete", "discrete-channel tasks");
  add_common(run_discrete, discrete_opts);
  int task = 0;
  run_discrete->add_option("--task", task, "discrete task (1 or 2)");

  CLI::App* grid = app.add_subcommand("reproduce-grid", "run the full reference grid");
  add_common(grid, grid_opts);

  CLI::App* export_traj = app.add_subcommand("export-traj", "export rollouts from a checkpoint");
  add_common(export_traj, export_opts);
  std::string checkpoint;
  std::vector<int> intents{0};
  int count = 1;
  int upsample = 30;
  export_traj->add_option("--checkpoint", checkpoint, "agent checkpoint path")->required();
  export_traj->add_option("--intents", intents, "intent ids to export");
  export_traj->add_option("--count", count, "rollouts per intent");
  export_traj->add_option("--upsample", upsample, "frames after upsampling (0: native)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_sp->parsed()) return run_and_report(load_config(train_opts));
    if (pretrain->parsed()) {
      auto cfg = load_config(pretrain_opts);
      cfg.curriculum = true;
      return run_and_report(cfg);
    }
    if (eval_cp->parsed()) {
      auto cfg = load_config(cp_opts);
      cfg.eval_crossplay = true;
      cfg.observer_cells = "none";
      return run_and_report(cfg);
    }
    if (eval_obs->parsed()) {
      auto cfg = load_config(obs_opts);
      cfg.eval_crossplay = false;
      cfg.observer_cells = cells;
      return run_and_report(cfg);
    }
    if (run_discrete->parsed()) {
      auto cfg = load_config(discrete_opts);
      cfg.domain = "discrete";
      if (task != 0) cfg.discrete_task = task;
      return run_and_report(cfg);
    }
    if (grid->parsed()) {
      auto cfg = load_config(grid_opts);
      const std::string root = !cfg.out_dir.empty() ? cfg.out_dir : emcomm::default_out_root() + "/grid";
      const emcomm::GridSummary gs =
          emcomm::reproduce_paper_grid(cfg.scale.empty() ? "desk" : cfg.scale, root, cfg.seed, true);
      std::printf("%s", gs.report.c_str());
      return 0;
    }
    if (export_traj->parsed()) {
      auto cfg = load_config(export_opts);
      const std::string out =
          !cfg.out_dir.empty() ? cfg.out_dir : emcomm::default_out_root() + "/export";
      const emcomm::RunSummary rs =
          emcomm::export_trajectories(checkpoint, cfg, intents, count, upsample, out);
      std::printf("%s", rs.report.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
