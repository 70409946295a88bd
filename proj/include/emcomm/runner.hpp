#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emcomm/config.hpp"
#include "emcomm/evaluation.hpp"

namespace emcomm {

// Output root: $EMCOMM_OUT_ROOT if set, else ./out.
std::string default_out_root();

BodyTopology topology_from(const ExperimentConfig& cfg);
NoiseParams noise_from(const ExperimentConfig& cfg);
TrainConfig train_config_from(const ExperimentConfig& cfg);
CurriculumConfig curriculum_from(const ExperimentConfig& cfg);

struct ObserverCell {
  InputMode train_feed = InputMode::kTrajectory;
  InputMode test_feed = InputMode::kTrajectory;
};
std::vector<ObserverCell> observer_cells_from(const ExperimentConfig& cfg);

// Deterministic parallel map: schedules [0, count) across hardware threads.
// Tasks must derive their randomness from their own index, which makes
// serial and parallel execution produce identical results.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// Trains cfg.population independent pairs (optionally torque-pretrained),
// with per-member seeds split from the root seed. Logs land in `logs` in
// member order when non-null. With a checkpoint_dir and a positive
// cfg.checkpoint_every, members write periodic checkpoints there.
Population train_population(const ExperimentConfig& cfg, std::vector<TrainLog>* logs = nullptr,
                            std::vector<TrainLog>* curriculum_logs = nullptr,
                            bool verbose = false, const std::string& checkpoint_dir = "");

struct RunSummary {
  std::string out_dir;
  std::string report;
};

// Full experiment: train, evaluate, and persist logs, checkpoints,
// reports, and metadata under one artifact directory.
RunSummary run_experiment(const ExperimentConfig& cfg);

struct GridCell {
  std::string section;  // e.g. continuous n=2 curriculum=off
  std::string metric;   // e.g. observer tau:phi, sp, cp
  double measured = 0.0;
  double paper = 0.0;
  std::string error;  // non-empty if the cell failed
};

struct GridSummary {
  std::string out_dir;
  std::vector<GridCell> cells;
  std::string report;
};

// Knobs for shrinking the grid (tests, quick smokes). Zero keeps the
// per-size defaults.
struct GridOptions {
  int iterations = 0;
  int observer_iterations = 0;
  int batch = 0;
  int eval_batch = 0;  // covers crossplay, gaussian and entropy sampling
};

// Reproduces the experiment grid: the 2/5/10-intent continuous tasks with
// and without the torque curriculum (all four observer cells each) plus
// both discrete tasks, printing measured values beside the reference
// constants. Cell failures are recorded and the grid continues.
GridSummary reproduce_paper_grid(const std::string& scale, const std::string& out_root,
                                 std::uint64_t seed, bool verbose = false,
                                 const GridOptions& options = {});

struct Frame {
  std::vector<double> rotations;
  std::vector<double> positions;
};

// Linear interpolation in rotation space across the T+1 poses of a rollout
// (reference pose included); positions recomputed by FK per frame.
std::vector<Frame> upsample_trajectory(const Trajectory& traj, const BodyTopology& topo,
                                       int frames);

std::string trajectory_document(const Trajectory& traj, const BodyTopology& topo,
                                int upsample_frames, std::uint64_t cfg_hash, std::uint64_t seed);

// Rolls out `count` trajectories per requested intent from a saved agent
// checkpoint and writes one export document each.
RunSummary export_trajectories(const std::string& checkpoint_path, const ExperimentConfig& cfg,
                               const std::vector<int>& intents, int count, int upsample_frames,
                               const std::string& out_dir);

}  // namespace emcomm
