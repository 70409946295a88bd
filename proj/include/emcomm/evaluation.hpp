#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emcomm/agents.hpp"
#include "emcomm/protocol.hpp"

namespace emcomm {

// Independently trained pairs sharing one task configuration.
struct Population {
  std::vector<AgentPair> pairs;
  BodyTopology topo;
  NoiseParams noise;
  TrainConfig cfg;
};

// Self-play accuracy of one pair: the co-trained discriminator's argmax
// over fresh noisy rollouts, intents drawn from the prior.
double sp_accuracy(AgentPair& pair, const TrainConfig& cfg, const BodyTopology& topo,
                   const NoiseParams& noise, int batch, Rng& rng);

// Entry (i, j): accuracy of pair j's discriminator on fresh rollouts from
// pair i's policy. The diagonal is self-play; the off-diagonal mean is the
// cross-play score.
Tensor crossplay_matrix(Population& pop, int batch, Rng& rng);
double offdiagonal_mean(const Tensor& matrix);
double diagonal_mean(const Tensor& matrix);

// Builds the feed an observer consumes from rolled-out batch values.
// When the feed kind does not match the net's input mode, the probe is made
// dimension-compatible: a latent-mode net probed with trajectories gets the
// energy recomputed from the observed rotations (circular differences,
// observation noise included); a trajectory-mode net probed with the latent
// gets the scalar zero-padded.
struct BatchValues {
  std::vector<Tensor> observed_rotations;  // per step (B, 3J)
  std::vector<Tensor> observed_positions;
  std::vector<Tensor> actions;
  Tensor observed_flat;  // (B, 9JT)
  Tensor energy;         // (B, 1)
};

BatchValues collect_batch_values(PolicyNet& policy, std::span<const int> intents,
                                 const BodyTopology& topo, const NoiseParams& noise, int horizon,
                                 double inertia, Rng& rng);

Tensor extract_feed(const BatchValues& values, InputMode net_mode, InputMode feed_kind,
                    const BodyTopology& topo, const NoiseParams& noise, double inertia);

struct ObserverConfig {
  InputMode train_feed = InputMode::kTrajectory;
  InputMode test_feed = InputMode::kTrajectory;
  int iterations = 500;
  int batch = 1024;
  double lr = 1e-3;
  int hidden = 128;
  std::uint64_t split_seed = 17;  // fixed so repeated evaluations share the split
};

struct ObserverResult {
  std::vector<std::pair<int, double>> curve;  // iteration, test accuracy
  double final_accuracy = 0.0;                // mean over the last tenth of iterations
  std::vector<int> train_ids, test_ids;
};

// Third-party observer: a fresh discriminator trains on rollouts of the
// 80% train split and is tested each iteration on the held-out actors.
// Actor parameters are checksummed before and after; any mutation is an
// internal error. Populations below 5 members cannot be split.
ObserverResult external_observer_eval(Population& pop, const ObserverConfig& cfg, Rng& rng);

struct GaussianFit {
  double mean = 0.0;
  double stddev = 0.0;
};

// Per-intent sample mean and standard deviation of the latent energy over
// `batch` rollouts per intent.
std::vector<GaussianFit> fit_intent_energy_gaussians(AgentPair& pair, const TrainConfig& cfg,
                                                     const BodyTopology& topo,
                                                     const NoiseParams& noise, int batch, Rng& rng);

// Overlap coefficient of two Gaussians: integral of the pointwise minimum
// of the densities, on a grid spanning +-6 standard deviations.
double gaussian_overlap(const GaussianFit& a, const GaussianFit& b);

struct EntropyEstimate {
  double h_given_phi = 0.0;  // H(G | Phi), nats
  double h_prior = 0.0;      // H(G), nats; I(G;Phi) = h_prior - h_given_phi
};

// Monte-Carlo estimate of the conditional entropy of the intent given the
// latent feature, under the fitted Gaussian mixture.
EntropyEstimate conditional_entropy_estimate(std::span<const GaussianFit> fits,
                                             const IntentDistribution& prior, int samples,
                                             Rng& rng);

// Aggregated zero-shot measurements for one population, with a structured
// text emission (grids, curves and fits as comma-separated rows).
struct EvalReport {
  Tensor crossplay;                                   // actor x observer accuracies
  std::vector<std::pair<std::string, ObserverResult>> observer_cells;  // "tau:phi" etc.
  std::vector<std::vector<GaussianFit>> energy_fits;  // per agent, per intent
  std::vector<EntropyEstimate> structure;             // per agent

  std::string to_text() const;
};

struct EnergyTrace {
  int stride = 1;
  std::vector<int> iterations;                  // sampled iterations
  std::vector<std::vector<double>> energy;      // per sample, per intent
  std::vector<std::vector<int>> ranks;          // per sample, rank of each intent (0 = lowest)
  std::vector<int> reorder_counts;              // per intent, rank changes between samples
  int min_mean_energy_intent_final = -1;        // over the final half of samples
  double intent0_rank0_share_final = 0.0;       // fraction of final-half samples at rank 0

  std::string to_csv() const;
};

// Sub-sampled per-intent energy series with rank-order bookkeeping.
EnergyTrace intent_energy_trace(const TrainLog& log, int stride);

}  // namespace emcomm
