#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emcomm/agents.hpp"
#include "emcomm/body.hpp"
#include "emcomm/graph.hpp"
#include "emcomm/intents.hpp"
#include "emcomm/rng.hpp"

namespace emcomm {

// Gaussian noise scales: sigma_a perturbs actions (exploration and
// imperfect actuation), sigma_p / sigma_r perturb the observed positions
// and rotations (imperfect observability). Zeroing one side reproduces
// either reading of where the noise belongs.
struct NoiseParams {
  double sigma_p = 2.0;  // feet
  double sigma_r = 0.4;  // radians
  double sigma_a = 0.4;  // radians per step

  void validate() const;
};

// The message: rolled-out joint states with the velocity actions that
// produced them, the noisy copies an observer sees, and the scalar torque
// energy of the action sequence.
struct Trajectory {
  int intent = 0;
  // Step t = 1..T at index t-1; each entry is a flat 3J vector.
  std::vector<std::vector<double>> rotations;
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> actions;  // post-noise
  std::vector<std::vector<double>> observed_rotations;
  std::vector<std::vector<double>> observed_positions;
  double energy = 0.0;
};

struct TrainConfig {
  int intents = 10;
  double zipf_exponent = 1.0;
  bool uniform = false;       // uniform ablation (equivalent to exponent 0)
  double lambda_energy = 0.01;
  int horizon = 5;
  int batch = 1024;
  int iterations = 2000;
  int hidden = 128;
  double lr = 1e-3;
  double inertia = 1.0;  // moment of inertia per DOF
  InputMode input_mode = InputMode::kTrajectory;
  int checkpoint_every = 0;  // 0: no periodic checkpoints

  IntentDistribution distribution() const;
};

// L2 torque loss over a sequence of per-DOF velocities, with the body at
// rest before the first step: sum over steps and DOFs of
// (inertia * (w_t - w_{t-1}))^2.
double energy_loss(std::span<const std::vector<double>> actions, std::span<const double> inertia);

// -log p[target], floored at 1e-12.
double prediction_loss(std::span<const double> probs, int target);

// The scalar latent feature of a trajectory: the torque energy of its
// stored (post-noise) action sequence.
double latent_energy(const Trajectory& traj);

// Latent feature as a third party can compute it from the observed motion:
// velocities recovered by circular differences of the noisy rotations.
double observed_energy(const Trajectory& traj, const BodyTopology& topo, double inertia = 1.0);

// Graph-level batch rollout. Handles reference the graph that produced
// them; values can be read without running backward.
struct RolloutBatch {
  int horizon = 0;
  Var observed_flat;            // (B, 9*J*T): per step obs rot | obs pos | action
  Var energy;                   // (B, 1)
  std::vector<Var> rotations;   // per step (B, 3J), true state
  std::vector<Var> positions;   // per step (B, 3J)
  std::vector<Var> actions;     // per step (B, 3J), post-noise
  std::vector<Var> observed_rotations;
  std::vector<Var> observed_positions;
};

RolloutBatch rollout_batch(Graph& g, PolicyNet& policy, std::span<const int> intents,
                           const BodyTopology& topo, const NoiseParams& noise, int horizon,
                           double inertia, Rng& rng);

// Single noisy rollout for one intent.
Trajectory rollout(PolicyNet& policy, int intent, const BodyTopology& topo,
                   const NoiseParams& noise, int horizon, Rng& rng, double inertia = 1.0);

struct TrainLogRow {
  int iteration = 0;
  double accuracy = 0.0;
  double loss_pred = 0.0;
  double loss_energy = 0.0;
  long clamp_events = 0;
  std::vector<double> intent_energy;  // mean energy per intent; NaN if unseen
};

struct TrainLog {
  int intents = 0;
  std::vector<TrainLogRow> rows;

  std::string to_csv() const;
};

// Self-play protocol training: per iteration, sample a batch of intents
// from the prior, roll out, feed the co-trained discriminator either the
// observed flat trajectory or the latent energy, minimize mean prediction
// loss plus lambda times mean energy, and step both nets jointly.
// `on_checkpoint` fires every cfg.checkpoint_every iterations when set.
// Throws std::runtime_error with a diagnostic if the loss turns non-finite.
using CheckpointHook = std::function<void(int iteration, const AgentPair&)>;
TrainLog train_selfplay(AgentPair& pair, const TrainConfig& cfg, const BodyTopology& topo,
                        const NoiseParams& noise, Rng& rng,
                        const CheckpointHook& on_checkpoint = {});

struct CurriculumConfig {
  int iterations = 500;
  double lr = 1e-3;
  int batch = 256;
  double energy_threshold = 30.0;  // warn if the mean rollout energy stays above
};

struct CurriculumResult {
  TrainLog log;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  bool reached_threshold = false;
};

// Torque curriculum: trains the policy on the energy objective alone with
// uniformly sampled intents. Never touches any discriminator. If the
// threshold is not reached within the budget a warning is printed and the
// policy is returned as-is.
CurriculumResult pretrain_torque_curriculum(PolicyNet& policy, const TrainConfig& cfg,
                                            const CurriculumConfig& curriculum,
                                            const BodyTopology& topo, const NoiseParams& noise,
                                            Rng& rng);

// Mean rollout energy of the current policy under uniform intents.
double mean_rollout_energy(PolicyNet& policy, const TrainConfig& cfg, const BodyTopology& topo,
                           const NoiseParams& noise, int batch, Rng& rng);

}  // namespace emcomm
