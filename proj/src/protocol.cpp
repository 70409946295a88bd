#include "emcomm/protocol.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "emcomm/util.hpp"

namespace emcomm {
namespace {

constexpr double kLogFloor = 1e-12;

Tensor onehot_rows(std::span<const int> ids, int n) {
  Tensor t(ids.size(), n);
  for (std::size_t i = 0; i < ids.size(); ++i) t.at(i, ids[i]) = 1.0;
  return t;
}

Tensor repeat_row(std::span<const double> row, std::size_t rows) {
  Tensor t(rows, row.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < row.size(); ++c) t.at(r, c) = row[c];
  return t;
}

std::vector<double> tensor_row(const Tensor& t, std::size_t r) {
  std::vector<double> row(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) row[c] = t.at(r, c);
  return row;
}

double argmax_accuracy(const Tensor& probs, std::span<const int> targets) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs.at(r, c) > probs.at(r, best)) best = c;
    if (static_cast<int>(best) == targets[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

std::vector<double> per_intent_mean(const Tensor& energy, std::span<const int> intents, int n) {
  std::vector<double> sum(n, 0.0);
  std::vector<int> cnt(n, 0);
  for (std::size_t i = 0; i < energy.size(); ++i) {
    sum[intents[i]] += energy[i];
    ++cnt[intents[i]];
  }
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k)
    out[k] = cnt[k] > 0 ? sum[k] / cnt[k] : std::numeric_limits<double>::quiet_NaN();
  return out;
}

// Batch prediction loss: -log probs[target], clamped at 1e-12.
Var prediction_loss_graph(Graph& g, Var probs, std::span<const int> targets, int n) {
  const Var onehot = g.constant(onehot_rows(targets, n));
  const Var picked = row_sum(mul(probs, onehot));  // (B,1)
  return scale(mean(vlog(picked, kLogFloor)), -1.0);
}

}  // namespace

void NoiseParams::validate() const {
  if (sigma_p < 0.0 || sigma_r < 0.0 || sigma_a < 0.0)
    throw std::invalid_argument("noise: sigmas must be >= 0");
}

IntentDistribution TrainConfig::distribution() const {
  return zipf_probs(intents, uniform ? 0.0 : zipf_exponent);
}

double energy_loss(std::span<const std::vector<double>> actions, std::span<const double> inertia) {
  if (actions.empty()) throw std::invalid_argument("energy_loss: empty action sequence");
  const std::size_t dofs = actions[0].size();
  if (inertia.size() != dofs)
    throw std::invalid_argument(strf("energy_loss: %zu inertia values for %zu DOFs",
                                     inertia.size(), dofs));
  double total = 0.0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (actions[t].size() != dofs)
      throw std::invalid_argument("energy_loss: ragged action sequence");
    for (std::size_t d = 0; d < dofs; ++d) {
      const double prev = t == 0 ? 0.0 : actions[t - 1][d];  // at rest before step 1
      const double a = inertia[d] * (actions[t][d] - prev);
      total += a * a;
    }
  }
  return total;
}

double prediction_loss(std::span<const double> probs, int target) {
  if (target < 0 || target >= static_cast<int>(probs.size()))
    throw std::invalid_argument("prediction_loss: target out of range");
  const double p = probs[target] < kLogFloor ? kLogFloor : probs[target];
  return -std::log(p);
}

double latent_energy(const Trajectory& traj) { return traj.energy; }

double observed_energy(const Trajectory& traj, const BodyTopology& topo, double inertia) {
  const std::size_t dofs = static_cast<std::size_t>(topo.dof());
  std::vector<double> prev_rot(topo.reference_rotations.begin(), topo.reference_rotations.end());
  std::vector<double> prev_vel(dofs, 0.0);
  double total = 0.0;
  for (const auto& obs : traj.observed_rotations) {
    for (std::size_t d = 0; d < dofs; ++d) {
      const double vel = circular_diff(obs[d], prev_rot[d]);
      const double a = inertia * (vel - prev_vel[d]);
      total += a * a;
      prev_vel[d] = vel;
    }
    prev_rot.assign(obs.begin(), obs.end());
  }
  return total;
}

RolloutBatch rollout_batch(Graph& g, PolicyNet& policy, std::span<const int> intents,
                           const BodyTopology& topo, const NoiseParams& noise, int horizon,
                           double inertia, Rng& rng) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  noise.validate();
  const std::size_t batch = intents.size();
  const Pose p0 = reference_pose(topo);

  RolloutBatch rb;
  rb.horizon = horizon;
  const Var intent = g.constant(onehot_rows(intents, policy.intents));
  Var rot = g.constant(repeat_row(p0.rotations, batch));
  Var pos = g.constant(repeat_row(p0.positions, batch));

  Var prev_action{};
  Var energy{};
  std::vector<Var> flat_parts;
  flat_parts.reserve(3 * horizon);
  for (int t = 1; t <= horizon; ++t) {
    const Var input = concat_cols(std::array{rot, pos, intent});
    const Var mu = policy_forward(g, policy, input);
    const Var action = noise.sigma_a > 0.0 ? gaussian_noise(mu, noise.sigma_a, rng) : mu;
    const Var accel = t == 1 ? action : sub(action, prev_action);
    const Var term = row_sum(square(inertia == 1.0 ? accel : scale(accel, inertia)));
    energy = t == 1 ? term : add(energy, term);

    rot = wrap_two_pi(add(rot, action));
    pos = fk_positions_graph(rot, topo);
    const Var obs_rot = noise.sigma_r > 0.0 ? gaussian_noise(rot, noise.sigma_r, rng) : rot;
    const Var obs_pos = noise.sigma_p > 0.0 ? gaussian_noise(pos, noise.sigma_p, rng) : pos;

    rb.rotations.push_back(rot);
    rb.positions.push_back(pos);
    rb.actions.push_back(action);
    rb.observed_rotations.push_back(obs_rot);
    rb.observed_positions.push_back(obs_pos);
    flat_parts.push_back(obs_rot);
    flat_parts.push_back(obs_pos);
    flat_parts.push_back(action);
    prev_action = action;
  }
  rb.energy = energy;
  rb.observed_flat = concat_cols(flat_parts);
  return rb;
}

Trajectory rollout(PolicyNet& policy, int intent, const BodyTopology& topo,
                   const NoiseParams& noise, int horizon, Rng& rng, double inertia) {
  Graph g;
  const int ids[1] = {intent};
  const RolloutBatch rb = rollout_batch(g, policy, ids, topo, noise, horizon, inertia, rng);
  Trajectory traj;
  traj.intent = intent;
  traj.energy = g.value(rb.energy)[0];
  for (int t = 0; t < horizon; ++t) {
    traj.rotations.push_back(tensor_row(g.value(rb.rotations[t]), 0));
    traj.positions.push_back(tensor_row(g.value(rb.positions[t]), 0));
    traj.actions.push_back(tensor_row(g.value(rb.actions[t]), 0));
    traj.observed_rotations.push_back(tensor_row(g.value(rb.observed_rotations[t]), 0));
    traj.observed_positions.push_back(tensor_row(g.value(rb.observed_positions[t]), 0));
  }
  return traj;
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "iteration,accuracy,loss_pred,loss_energy,clamp_events";
  for (int k = 0; k < intents; ++k) out << ",energy_intent" << k;
  out << "\n";
  for (const auto& row : rows) {
    out << row.iteration << "," << strf("%.12g", row.accuracy) << ","
        << strf("%.12g", row.loss_pred) << "," << strf("%.12g", row.loss_energy) << ","
        << row.clamp_events;
    for (double e : row.intent_energy) out << "," << strf("%.12g", e);
    out << "\n";
  }
  return out.str();
}

TrainLog train_selfplay(AgentPair& pair, const TrainConfig& cfg, const BodyTopology& topo,
                        const NoiseParams& noise, Rng& rng, const CheckpointHook& on_checkpoint) {
  const IntentDistribution dist = cfg.distribution();
  const AdamConfig adam{cfg.lr};
  TrainLog log;
  log.intents = cfg.intents;
  log.rows.reserve(cfg.iterations);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const std::vector<int> intents = sample_intents(dist, cfg.batch, rng);
    Graph g;
    const RolloutBatch rb =
        rollout_batch(g, pair.policy, intents, topo, noise, cfg.horizon, cfg.inertia, rng);
    const Var feed = pair.discriminator.mode == InputMode::kTrajectory ? rb.observed_flat : rb.energy;
    const Var probs = discriminator_forward(g, pair.discriminator, feed);
    const Var loss_pred = prediction_loss_graph(g, probs, intents, cfg.intents);
    const Var loss_energy = mean(rb.energy);
    const Var total = add(loss_pred, scale(loss_energy, cfg.lambda_energy));

    const double total_value = g.value(total)[0];
    if (!std::isfinite(total_value))
      throw std::runtime_error(strf(
          "train_selfplay: non-finite loss at iteration %d (pred=%g, energy=%g); aborting", iter,
          g.value(loss_pred)[0], g.value(loss_energy)[0]));

    g.backward(total);
    pair.policy.params.adam_step(adam);
    pair.discriminator.params.adam_step(adam);

    TrainLogRow row;
    row.iteration = iter;
    row.accuracy = argmax_accuracy(g.value(probs), intents);
    row.loss_pred = g.value(loss_pred)[0];
    row.loss_energy = g.value(loss_energy)[0];
    row.clamp_events = g.clamp_events();
    row.intent_energy = per_intent_mean(g.value(rb.energy), intents, cfg.intents);
    log.rows.push_back(std::move(row));

    if (on_checkpoint && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
      on_checkpoint(iter + 1, pair);
  }
  return log;
}

double mean_rollout_energy(PolicyNet& policy, const TrainConfig& cfg, const BodyTopology& topo,
                           const NoiseParams& noise, int batch, Rng& rng) {
  const IntentDistribution uniform = zipf_probs(cfg.intents, 0.0);
  const std::vector<int> intents = sample_intents(uniform, batch, rng);
  Graph g;
  const RolloutBatch rb = rollout_batch(g, policy, intents, topo, noise, cfg.horizon, cfg.inertia, rng);
  return g.value(mean(rb.energy))[0];
}

CurriculumResult pretrain_torque_curriculum(PolicyNet& policy, const TrainConfig& cfg,
                                            const CurriculumConfig& curriculum,
                                            const BodyTopology& topo, const NoiseParams& noise,
                                            Rng& rng) {
  const IntentDistribution uniform = zipf_probs(cfg.intents, 0.0);
  const AdamConfig adam{curriculum.lr};
  CurriculumResult result;
  result.log.intents = cfg.intents;
  {
    Rng probe = rng.split(0x70b5);
    result.initial_energy = mean_rollout_energy(policy, cfg, topo, noise, curriculum.batch, probe);
  }

  for (int iter = 0; iter < curriculum.iterations; ++iter) {
    const std::vector<int> intents = sample_intents(uniform, curriculum.batch, rng);
    Graph g;
    const RolloutBatch rb =
        rollout_batch(g, policy, intents, topo, noise, cfg.horizon, cfg.inertia, rng);
    const Var loss = mean(rb.energy);
    const double loss_value = g.value(loss)[0];
    if (!std::isfinite(loss_value))
      throw std::runtime_error(
          strf("pretrain_torque_curriculum: non-finite energy at iteration %d", iter));
    g.backward(loss);
    policy.params.adam_step(adam);

    TrainLogRow row;
    row.iteration = iter;
    row.loss_energy = loss_value;
    row.intent_energy = per_intent_mean(g.value(rb.energy), intents, cfg.intents);
    result.log.rows.push_back(std::move(row));
  }

  {
    Rng probe = rng.split(0x70b6);
    result.final_energy = mean_rollout_energy(policy, cfg, topo, noise, curriculum.batch, probe);
  }
  result.reached_threshold = result.final_energy <= curriculum.energy_threshold;
  if (!result.reached_threshold)
    std::fprintf(stderr,
                 "warning: torque curriculum ended above threshold (%.3f > %.3f); continuing\n",
                 result.final_energy, curriculum.energy_threshold);
  return result;
}

}  // namespace emcomm
