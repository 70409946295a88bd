#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace emcomm {

// Flat key=value experiment configuration. Dotted keys group by module;
// the flat format diffs cleanly across sweep runs. A saved config re-run
// with the same seed reproduces all logs byte-identically.
struct ExperimentConfig {
  std::string domain = "continuous";  // continuous | discrete
  std::string scale = "full";         // full | desk (desk: batch 256, population 6)

  int intents = 2;
  double zipf_exponent = 1.0;
  bool uniform = false;

  int joints = 4;
  std::string euler_order = "xyz";

  double sigma_p = 2.0;
  double sigma_r = 0.4;
  double sigma_a = 0.4;

  double lambda = 0.01;
  int horizon = 5;
  int batch = 1024;
  int iterations = 2000;
  int hidden = 128;
  double lr = 1e-3;
  double inertia = 1.0;
  std::string input_mode = "trajectory";
  int checkpoint_every = 0;  // 0: only final checkpoints

  bool curriculum = false;
  int curriculum_iterations = 500;
  double curriculum_threshold = 30.0;

  int population = 10;

  int observer_iterations = 500;
  int observer_batch = 0;  // 0: use train batch
  double observer_lr = 1e-3;
  std::uint64_t observer_split_seed = 17;
  std::string observer_cells = "all";  // all | none | list like tau:tau,phi:phi

  bool eval_crossplay = true;
  int eval_batch = 0;  // 0: use train batch
  int gaussian_batch = 1024;
  int entropy_samples = 20000;

  int discrete_task = 1;
  double discrete_lambda = 0.05;
  double discrete_lr = 1.0;
  int discrete_iterations = 4000;
  int discrete_seeds = 5;

  std::uint64_t seed = 1;
  std::string out_dir;

  void validate() const;  // throws std::invalid_argument naming the key
  bool operator==(const ExperimentConfig& o) const;
};

// Canonical serialization: every key, fixed order, doubles at full
// precision so parse(serialize(cfg)) == cfg.
std::string serialize_config(const ExperimentConfig& cfg);

// Parses key=value text ('#' comments allowed). Unknown keys are rejected
// before any work, all offenders listed. The desk preset fills batch and
// population only where the file did not set them explicitly.
ExperimentConfig parse_config(const std::string& text);

std::uint64_t config_hash(const ExperimentConfig& cfg);

// Named scale presets.
ExperimentConfig apply_desk_preset(ExperimentConfig cfg);

}  // namespace emcomm
