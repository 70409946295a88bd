#include "emcomm/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "emcomm/discrete.hpp"
#include "emcomm/util.hpp"

namespace emcomm {
namespace {

constexpr const char* kVersion = "0.1.0";

std::string hash_header(std::uint64_t cfg_hash, std::uint64_t seed) {
  return strf("# config=%016llx seed=%llu\n", static_cast<unsigned long long>(cfg_hash),
              static_cast<unsigned long long>(seed));
}

std::string feed_short_name(InputMode mode) {
  return mode == InputMode::kTrajectory ? "tau" : "phi";
}

InputMode feed_from_short_name(const std::string& name) {
  if (name == "tau") return InputMode::kTrajectory;
  if (name == "phi") return InputMode::kLatent;
  throw std::invalid_argument("observer cell side must be tau or phi, got '" + name + "'");
}

std::string csv_matrix(const Tensor& t) {
  std::ostringstream out;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c)
      out << strf("%.12g", t.at(r, c)) << (c + 1 == t.cols() ? '\n' : ',');
  return out.str();
}

std::string metadata_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "version = " << kVersion << "\n";
  out << "config_hash = " << strf("%016llx", static_cast<unsigned long long>(config_hash(cfg)))
      << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "euler_order = " << cfg.euler_order << " (intrinsic, per joint)\n";
  out << "units = feet, radians\n";
  out << "state_layout = rotations(3J) | positions(3J)\n";
  out << "policy_input = state | one-hot intent\n";
  out << "trajectory_feed = per step: observed rotations | observed positions | actions "
         "(actions of every step included)\n";
  out << "energy = sum over steps and DOFs of (inertia * (w_t - w_{t-1}))^2, w_0 = 0\n";
  out << "action_noise = N(0, sigma_a^2) added to policy outputs before the transition\n";
  out << "observation_noise = N(0, sigma_r^2) on rotations, N(0, sigma_p^2) on positions\n";
  return out.str();
}

struct PaperCell {
  int n;
  bool curriculum;
  const char* train;
  const char* test;
  double value;
};

constexpr PaperCell kPaperContinuous[] = {
    {2, false, "tau", "tau", 0.75},  {2, false, "tau", "phi", 0.97},
    {2, false, "phi", "tau", 0.67},  {2, false, "phi", "phi", 0.997},
    {2, true, "tau", "tau", 0.66},   {2, true, "tau", "phi", 0.995},
    {2, true, "phi", "tau", 0.67},   {2, true, "phi", "phi", 0.999},
    {5, false, "tau", "tau", 0.37},  {5, false, "tau", "phi", 0.76},
    {5, false, "phi", "tau", 0.44},  {5, false, "phi", "phi", 0.60},
    {5, true, "tau", "tau", 0.44},   {5, true, "tau", "phi", 0.70},
    {5, true, "phi", "tau", 0.44},   {5, true, "phi", "phi", 0.70},
    {10, false, "tau", "tau", 0.30}, {10, false, "tau", "phi", 0.61},
    {10, false, "phi", "tau", 0.34}, {10, false, "phi", "phi", 0.55},
    {10, true, "tau", "tau", 0.56},  {10, true, "tau", "phi", 0.56},
    {10, true, "phi", "tau", 0.35},  {10, true, "phi", "phi", 0.56},
};

double paper_continuous(int n, bool curriculum, const std::string& train, const std::string& test) {
  for (const auto& cell : kPaperContinuous)
    if (cell.n == n && cell.curriculum == curriculum && train == cell.train && test == cell.test)
      return cell.value;
  return std::nan("");
}

}  // namespace

std::string default_out_root() {
  const char* env = std::getenv("EMCOMM_OUT_ROOT");
  return env && *env ? env : "out";
}

BodyTopology topology_from(const ExperimentConfig& cfg) {
  BodyTopology topo = default_arm(cfg.joints);
  topo.euler = euler_order_from_name(cfg.euler_order);
  return topo;
}

NoiseParams noise_from(const ExperimentConfig& cfg) {
  NoiseParams noise;
  noise.sigma_p = cfg.sigma_p;
  noise.sigma_r = cfg.sigma_r;
  noise.sigma_a = cfg.sigma_a;
  return noise;
}

TrainConfig train_config_from(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.intents = cfg.intents;
  tc.zipf_exponent = cfg.zipf_exponent;
  tc.uniform = cfg.uniform;
  tc.lambda_energy = cfg.lambda;
  tc.horizon = cfg.horizon;
  tc.batch = cfg.batch;
  tc.iterations = cfg.iterations;
  tc.hidden = cfg.hidden;
  tc.lr = cfg.lr;
  tc.inertia = cfg.inertia;
  tc.input_mode = input_mode_from_name(cfg.input_mode);
  tc.checkpoint_every = cfg.checkpoint_every;
  return tc;
}

CurriculumConfig curriculum_from(const ExperimentConfig& cfg) {
  CurriculumConfig cc;
  cc.iterations = cfg.curriculum_iterations;
  cc.lr = cfg.lr;
  cc.batch = cfg.batch;
  cc.energy_threshold = cfg.curriculum_threshold;
  return cc;
}

std::vector<ObserverCell> observer_cells_from(const ExperimentConfig& cfg) {
  std::vector<ObserverCell> cells;
  if (cfg.observer_cells == "none") return cells;
  if (cfg.observer_cells == "all") {
    for (InputMode train : {InputMode::kTrajectory, InputMode::kLatent})
      for (InputMode test : {InputMode::kTrajectory, InputMode::kLatent})
        cells.push_back({train, test});
    return cells;
  }
  for (const auto& cell : split(cfg.observer_cells, ',')) {
    const auto sides = split(cell, ':');
    if (sides.size() != 2)
      throw std::invalid_argument("observer.cells entry must be train:test, got '" + cell + "'");
    cells.push_back({feed_from_short_name(trim(sides[0])), feed_from_short_name(trim(sides[1]))});
  }
  return cells;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

Population train_population(const ExperimentConfig& cfg, std::vector<TrainLog>* logs,
                            std::vector<TrainLog>* curriculum_logs, bool verbose,
                            const std::string& checkpoint_dir) {
  cfg.validate();
  Population pop;
  pop.topo = topology_from(cfg);
  pop.noise = noise_from(cfg);
  pop.cfg = train_config_from(cfg);
  pop.pairs.resize(cfg.population);
  if (logs) logs->resize(cfg.population);
  if (curriculum_logs) curriculum_logs->resize(cfg.population);

  const Rng root(cfg.seed);
  const std::string condition =
      strf("%s,%s,lambda=%g%s", cfg.uniform ? "uniform" : "zipf", cfg.input_mode.c_str(),
           cfg.lambda, cfg.curriculum ? ",curriculum" : "");
  parallel_for(cfg.population, [&](std::size_t k) {
    const std::uint64_t member_seed = root.split(100 + k).seed();
    AgentPair pair = make_agent_pair(static_cast<int>(k), member_seed, condition, cfg.joints,
                                     cfg.intents, cfg.hidden, input_mode_from_name(cfg.input_mode),
                                     cfg.horizon);
    Rng rng(member_seed);
    if (cfg.curriculum) {
      Rng curriculum_rng = rng.split(7);
      CurriculumResult res = pretrain_torque_curriculum(pair.policy, pop.cfg, curriculum_from(cfg),
                                                        pop.topo, pop.noise, curriculum_rng);
      if (curriculum_logs) (*curriculum_logs)[k] = std::move(res.log);
    }
    Rng train_rng = rng.split(8);
    CheckpointHook hook;
    if (!checkpoint_dir.empty() && cfg.checkpoint_every > 0)
      hook = [&](int iteration, const AgentPair& snapshot) {
        save_agent(snapshot, checkpoint_dir + strf("/agent%zu_iter%d.ckpt", k, iteration),
                   hash_header(config_hash(cfg), cfg.seed));
      };
    TrainLog log = train_selfplay(pair, pop.cfg, pop.topo, pop.noise, train_rng, hook);
    if (verbose && !log.rows.empty())
      std::fprintf(stderr, "  agent %zu: final accuracy %.3f, energy %.3f\n", k,
                   log.rows.back().accuracy, log.rows.back().loss_energy);
    if (logs) (*logs)[k] = std::move(log);
    pop.pairs[k] = std::move(pair);
  });
  return pop;
}

namespace {

RunSummary run_discrete_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const std::uint64_t hash = config_hash(cfg);
  const std::string header = hash_header(hash, cfg.seed);
  const DiscreteChannelSpec spec =
      cfg.discrete_task == 1 ? DiscreteChannelSpec::task1() : DiscreteChannelSpec::task2();
  const Rng root(cfg.seed);

  std::ostringstream report;
  report << "discrete task " << cfg.discrete_task << ", " << cfg.discrete_seeds
         << " seeds per condition\n";
  std::ostringstream summary_csv;
  summary_csv << header << "condition,sp_mean,sp_std,cp_mean,cp_std\n";

  for (DiscreteCondition condition : {DiscreteCondition::kZipfOnly, DiscreteCondition::kZipfEnergy}) {
    std::vector<DiscretePair> pairs(cfg.discrete_seeds);
    parallel_for(pairs.size(), [&](std::size_t s) {
      pairs[s] = train_discrete_pair(spec, condition, cfg.discrete_lambda, cfg.discrete_lr,
                                     cfg.discrete_iterations, root.split(200 + s).seed());
    });
    std::vector<double> sp, cp;
    for (const auto& pair : pairs) sp.push_back(discrete_sp_accuracy(pair));
    for (std::size_t i = 0; i < pairs.size(); ++i)
      for (std::size_t j = 0; j < pairs.size(); ++j)
        if (i != j) cp.push_back(discrete_cp_accuracy(pairs[i], pairs[j]));
    auto stats = [](const std::vector<double>& xs) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= xs.size();
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      return std::pair{mean, std::sqrt(xs.size() > 1 ? var / (xs.size() - 1) : 0.0)};
    };
    const auto [sp_mean, sp_std] = stats(sp);
    const auto [cp_mean, cp_std] = stats(cp);
    const std::string cond = discrete_condition_name(condition);
    report << strf("  %-12s SP %.3f +- %.3f   CP %.3f +- %.3f\n", cond.c_str(), sp_mean, sp_std,
                   cp_mean, cp_std);
    summary_csv << strf("%s,%.12g,%.12g,%.12g,%.12g\n", cond.c_str(), sp_mean, sp_std, cp_mean,
                        cp_std);
    const std::string tag = condition == DiscreteCondition::kZipfOnly ? "zipf" : "zipf-energy";
    write_text_file(out_dir + "/discrete/heatmaps_" + tag + "_sp.csv",
                    header + protocol_heatmaps(pairs, PairingMode::kSelfPlay));
    write_text_file(out_dir + "/discrete/heatmaps_" + tag + "_cp.csv",
                    header + protocol_heatmaps(pairs, PairingMode::kCrossPlay));
  }
  write_text_file(out_dir + "/discrete/summary.csv", summary_csv.str());

  RunSummary rs;
  rs.out_dir = out_dir;
  rs.report = report.str();
  return rs;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t hash = config_hash(cfg);
  const std::string out_dir =
      !cfg.out_dir.empty()
          ? cfg.out_dir
          : default_out_root() + strf("/exp_%016llx", static_cast<unsigned long long>(hash));
  write_text_file(out_dir + "/config.cfg", serialize_config(cfg));
  write_text_file(out_dir + "/metadata.txt", metadata_text(cfg));

  if (cfg.domain == "discrete") {
    RunSummary rs = run_discrete_experiment(cfg, out_dir);
    write_text_file(out_dir + "/summary.txt", hash_header(hash, cfg.seed) + rs.report);
    return rs;
  }

  const std::string header = hash_header(hash, cfg.seed);
  std::ostringstream report;

  std::vector<TrainLog> logs, curriculum_logs;
  Population pop = train_population(cfg, &logs, &curriculum_logs, false, out_dir + "/train");
  for (int k = 0; k < cfg.population; ++k) {
    write_text_file(out_dir + strf("/train/agent%d.csv", k), header + logs[k].to_csv());
    if (cfg.curriculum)
      write_text_file(out_dir + strf("/train/agent%d_curriculum.csv", k),
                      header + curriculum_logs[k].to_csv());
    save_agent(pop.pairs[k], out_dir + strf("/train/agent%d.ckpt", k), header);
    const EnergyTrace trace = intent_energy_trace(logs[k], std::max(1, cfg.iterations / 200));
    write_text_file(out_dir + strf("/eval/energy_trace_agent%d.csv", k), header + trace.to_csv());
  }
  if (!logs.empty() && !logs[0].rows.empty()) {
    double acc = 0.0;
    for (const auto& log : logs) acc += log.rows.back().accuracy;
    report << strf("self-play final accuracy (train batch): %.3f\n", acc / logs.size());
  }

  const int eval_batch = cfg.eval_batch > 0 ? cfg.eval_batch : cfg.batch;
  const Rng root(cfg.seed);
  EvalReport eval_report;
  if (cfg.eval_crossplay) {
    Rng cp_rng = root.split(3000);
    eval_report.crossplay = crossplay_matrix(pop, eval_batch, cp_rng);
    write_text_file(out_dir + "/eval/crossplay.csv", header + csv_matrix(eval_report.crossplay));
    report << strf("cross-play: diagonal (SP) mean %.3f, off-diagonal (CP) mean %.3f\n",
                   diagonal_mean(eval_report.crossplay), offdiagonal_mean(eval_report.crossplay));
  }

  for (const ObserverCell& cell : observer_cells_from(cfg)) {
    ObserverConfig ocfg;
    ocfg.train_feed = cell.train_feed;
    ocfg.test_feed = cell.test_feed;
    ocfg.iterations = cfg.observer_iterations;
    ocfg.batch = cfg.observer_batch > 0 ? cfg.observer_batch : cfg.batch;
    ocfg.lr = cfg.observer_lr;
    ocfg.hidden = cfg.hidden;
    ocfg.split_seed = cfg.observer_split_seed;
    Rng obs_rng = root.split(4000 + (cell.train_feed == InputMode::kLatent ? 2 : 0) +
                             (cell.test_feed == InputMode::kLatent ? 1 : 0));
    const ObserverResult res = external_observer_eval(pop, ocfg, obs_rng);
    std::ostringstream csv;
    csv << header << "iteration,test_accuracy\n";
    for (const auto& [iter, acc] : res.curve) csv << iter << "," << strf("%.12g", acc) << "\n";
    csv << "final," << strf("%.12g", res.final_accuracy) << "\n";
    const std::string name = strf("observer_%s_%s", feed_short_name(cell.train_feed).c_str(),
                                  feed_short_name(cell.test_feed).c_str());
    write_text_file(out_dir + "/eval/" + name + ".csv", csv.str());
    report << strf("observer train=%s test=%s: final accuracy %.3f\n",
                   feed_short_name(cell.train_feed).c_str(),
                   feed_short_name(cell.test_feed).c_str(), res.final_accuracy);
    eval_report.observer_cells.emplace_back(
        feed_short_name(cell.train_feed) + ":" + feed_short_name(cell.test_feed), res);
  }

  {
    std::ostringstream gauss_csv, structure_csv;
    gauss_csv << header << "agent,intent,mean,std\n";
    structure_csv << header << "agent,h_prior,h_given_phi,mutual_information\n";
    const IntentDistribution prior = pop.cfg.distribution();
    for (int k = 0; k < cfg.population; ++k) {
      Rng fit_rng = root.split(5000 + k);
      const auto fits = fit_intent_energy_gaussians(pop.pairs[k], pop.cfg, pop.topo, pop.noise,
                                                    cfg.gaussian_batch, fit_rng);
      for (int g = 0; g < cfg.intents; ++g)
        gauss_csv << strf("%d,%d,%.12g,%.12g\n", k, g, fits[g].mean, fits[g].stddev);
      Rng mc_rng = root.split(6000 + k);
      const EntropyEstimate est =
          conditional_entropy_estimate(fits, prior, cfg.entropy_samples, mc_rng);
      structure_csv << strf("%d,%.12g,%.12g,%.12g\n", k, est.h_prior, est.h_given_phi,
                            est.h_prior - est.h_given_phi);
      eval_report.energy_fits.push_back(fits);
      eval_report.structure.push_back(est);
    }
    write_text_file(out_dir + "/eval/gaussians.csv", gauss_csv.str());
    write_text_file(out_dir + "/eval/structure.csv", structure_csv.str());
  }
  write_text_file(out_dir + "/eval/report.txt", header + eval_report.to_text());

  RunSummary rs;
  rs.out_dir = out_dir;
  rs.report = report.str();
  write_text_file(out_dir + "/summary.txt", header + rs.report);
  return rs;
}

GridSummary reproduce_paper_grid(const std::string& scale, const std::string& out_root,
                                 std::uint64_t seed, bool verbose, const GridOptions& options) {
  GridSummary grid;
  grid.out_dir = out_root;
  std::ostringstream report;
  report << "reference grid, scale=" << scale << "\n";

  for (int n : {2, 5, 10}) {
    for (bool curriculum : {false, true}) {
      ExperimentConfig cfg;
      cfg.scale = scale;
      if (scale == "desk") cfg = apply_desk_preset(cfg);
      cfg.intents = n;
      cfg.curriculum = curriculum;
      cfg.iterations = options.iterations > 0 ? options.iterations
                                              : (n == 2 ? 2000 : (n == 5 ? 2500 : 3000));
      cfg.observer_iterations =
          options.observer_iterations > 0 ? options.observer_iterations : (n == 10 ? 1000 : 500);
      if (options.batch > 0) cfg.batch = options.batch;
      if (options.eval_batch > 0) {
        cfg.eval_batch = options.eval_batch;
        cfg.observer_batch = options.eval_batch;
        cfg.gaussian_batch = options.eval_batch;
        cfg.entropy_samples = options.eval_batch;
      }
      cfg.seed = seed;
      cfg.out_dir = out_root + strf("/continuous_n%d_%s", n, curriculum ? "curr" : "nocurr");
      cfg.observer_cells = "all";
      const std::string section =
          strf("continuous n=%d curriculum=%s", n, curriculum ? "on" : "off");
      if (verbose) std::fprintf(stderr, "[grid] %s\n", section.c_str());
      try {
        const RunSummary rs = run_experiment(cfg);
        // Re-read the observer finals from the run's own artifacts.
        for (const char* train : {"tau", "phi"})
          for (const char* test : {"tau", "phi"}) {
            const std::string path = rs.out_dir + strf("/eval/observer_%s_%s.csv", train, test);
            const std::string text = read_text_file(path);
            const std::size_t pos = text.rfind("final,");
            GridCell cell;
            cell.section = section;
            cell.metric = strf("observer %s:%s", train, test);
            cell.measured = std::stod(text.substr(pos + 6));
            cell.paper = paper_continuous(n, curriculum, train, test);
            grid.cells.push_back(cell);
          }
      } catch (const std::exception& e) {
        GridCell cell;
        cell.section = section;
        cell.metric = "run";
        cell.error = e.what();
        grid.cells.push_back(cell);
      }
    }
  }

  for (int task : {1, 2}) {
    ExperimentConfig cfg;
    cfg.domain = "discrete";
    cfg.scale = scale;
    cfg.discrete_task = task;
    if (options.iterations > 0) cfg.discrete_iterations = std::min(cfg.discrete_iterations, 200);
    cfg.seed = seed;
    cfg.out_dir = out_root + strf("/discrete_task%d", task);
    const std::string section = strf("discrete task %d", task);
    if (verbose) std::fprintf(stderr, "[grid] %s\n", section.c_str());
    try {
      const RunSummary rs = run_experiment(cfg);
      const std::string text = read_text_file(rs.out_dir + "/discrete/summary.csv");
      for (const auto& line : split(text, '\n')) {
        if (line.empty() || line[0] == '#' || line.rfind("condition", 0) == 0) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 5) continue;
        const bool energy = fields[0] == "zipf+energy";
        GridCell sp_cell, cp_cell;
        sp_cell.section = cp_cell.section = section;
        sp_cell.metric = "sp " + fields[0];
        sp_cell.measured = std::stod(fields[1]);
        sp_cell.paper = task == 1 ? 0.97 : std::nan("");
        cp_cell.metric = "cp " + fields[0];
        cp_cell.measured = std::stod(fields[3]);
        cp_cell.paper = task == 1 ? (energy ? 0.58 : 0.15) : (energy ? 0.35 : 0.20);
        grid.cells.push_back(sp_cell);
        grid.cells.push_back(cp_cell);
      }
    } catch (const std::exception& e) {
      GridCell cell;
      cell.section = section;
      cell.metric = "run";
      cell.error = e.what();
      grid.cells.push_back(cell);
    }
  }

  std::ostringstream csv;
  csv << "section,metric,measured,reference\n";
  for (const auto& cell : grid.cells) {
    if (!cell.error.empty()) {
      report << strf("%-36s %-18s FAILED: %s\n", cell.section.c_str(), cell.metric.c_str(),
                     cell.error.c_str());
      csv << cell.section << "," << cell.metric << ",failed,\n";
      continue;
    }
    report << strf("%-36s %-18s measured %.3f   reference %.3f\n", cell.section.c_str(),
                   cell.metric.c_str(), cell.measured, cell.paper);
    csv << cell.section << "," << cell.metric << "," << strf("%.12g", cell.measured) << ","
        << strf("%.3g", cell.paper) << "\n";
  }
  grid.report = report.str();
  write_text_file(out_root + "/grid_summary.csv", csv.str());
  write_text_file(out_root + "/grid_report.txt", grid.report);
  return grid;
}

std::vector<Frame> upsample_trajectory(const Trajectory& traj, const BodyTopology& topo,
                                       int frames) {
  if (frames < 2) throw std::invalid_argument("upsample_trajectory: need at least two frames");
  const int horizon = static_cast<int>(traj.rotations.size());
  const Pose p0 = reference_pose(topo);
  std::vector<const std::vector<double>*> poses;
  poses.push_back(&p0.rotations);
  for (const auto& r : traj.rotations) poses.push_back(&r);

  std::vector<Frame> out(frames);
  for (int i = 0; i < frames; ++i) {
    const double u = static_cast<double>(i) / (frames - 1) * horizon;
    const int lo = std::min(static_cast<int>(u), horizon);
    const int hi = std::min(lo + 1, horizon);
    const double w = u - lo;
    Frame frame;
    frame.rotations.resize(topo.dof());
    for (int d = 0; d < topo.dof(); ++d)
      frame.rotations[d] = (1.0 - w) * (*poses[lo])[d] + w * (*poses[hi])[d];
    frame.positions = fk_positions(frame.rotations, topo);
    out[i] = std::move(frame);
  }
  return out;
}

std::string trajectory_document(const Trajectory& traj, const BodyTopology& topo,
                                int upsample_frames, std::uint64_t cfg_hash, std::uint64_t seed) {
  std::ostringstream out;
  out << hash_header(cfg_hash, seed);
  out << "emcomm-trajectory 1\n";
  out << "convention = euler-intrinsic-" << euler_order_name(topo.euler) << "\n";
  out << "joints = " << topo.joints << "\n";
  out << "parents =";
  for (int p : topo.parent) out << " " << p;
  out << "\n";
  out << "link_offsets =";
  for (const auto& off : topo.offsets) out << strf(" %.17g,%.17g,%.17g", off[0], off[1], off[2]);
  out << "\n";
  out << "intent = " << traj.intent << "\n";
  out << "energy = " << strf("%.17g", traj.energy) << "\n";
  out << "horizon = " << traj.rotations.size() << "\n";

  const int native_frames = static_cast<int>(traj.rotations.size()) + 1;
  const int frames = upsample_frames > 0 ? upsample_frames : native_frames;
  out << "frames = " << frames << "\n";
  out << "upsampled = " << (frames != native_frames ? "true" : "false")
      << " (linear interpolation in rotation space)\n";
  const std::vector<Frame> upsampled = upsample_trajectory(traj, topo, frames);
  for (int i = 0; i < frames; ++i) {
    out << "frame " << i << "\n";
    out << "rotations";
    for (double r : upsampled[i].rotations) out << strf(" %.17g", r);
    out << "\npositions";
    for (double p : upsampled[i].positions) out << strf(" %.17g", p);
    out << "\n";
  }
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    out << "action " << (t + 1);
    for (double a : traj.actions[t]) out << strf(" %.17g", a);
    out << "\n";
  }
  return out.str();
}

RunSummary export_trajectories(const std::string& checkpoint_path, const ExperimentConfig& cfg,
                               const std::vector<int>& intents, int count, int upsample_frames,
                               const std::string& out_dir) {
  AgentPair agent = load_agent(checkpoint_path);  // throws if missing
  const BodyTopology topo = topology_from(cfg);
  const NoiseParams noise = noise_from(cfg);
  const std::uint64_t hash = config_hash(cfg);
  const Rng root(cfg.seed);

  RunSummary rs;
  rs.out_dir = out_dir;
  std::ostringstream report;
  for (int intent : intents) {
    if (intent < 0 || intent >= agent.policy.intents)
      throw std::invalid_argument(strf("export: intent %d out of range [0,%d)", intent,
                                       agent.policy.intents));
    for (int i = 0; i < count; ++i) {
      Rng rng = root.split(9000 + 97 * intent + i);
      const Trajectory traj =
          rollout(agent.policy, intent, topo, noise, cfg.horizon, rng, cfg.inertia);
      const std::string path = out_dir + strf("/traj_intent%d_%d.txt", intent, i);
      write_text_file(path, trajectory_document(traj, topo, upsample_frames, hash, cfg.seed));
      report << path << strf("  energy %.4f\n", traj.energy);
    }
  }
  rs.report = report.str();
  return rs;
}

}  // namespace emcomm
