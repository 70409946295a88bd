#include "emcomm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "emcomm/util.hpp"

namespace emcomm {
namespace {

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < t.cols(); ++c)
    if (t.at(r, c) > t.at(r, best)) best = c;
  return best;
}

double batch_accuracy(const Tensor& probs, std::span<const int> targets) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r)
    if (static_cast<int>(argmax_row(probs, r)) == targets[r]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

// Energy a third party can recompute from the observed rotations alone:
// velocities recovered as circular differences step to step, body at rest
// before step 1.
Tensor energy_from_observed_rotations(const BatchValues& values, const BodyTopology& topo,
                                      double inertia) {
  const std::size_t batch = values.energy.rows();
  const std::size_t dofs = static_cast<std::size_t>(topo.dof());
  Tensor out(batch, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<double> prev_rot(dofs);
    for (std::size_t d = 0; d < dofs; ++d) prev_rot[d] = topo.reference_rotations[d];
    std::vector<double> prev_vel(dofs, 0.0);
    double total = 0.0;
    for (const Tensor& obs : values.observed_rotations) {
      for (std::size_t d = 0; d < dofs; ++d) {
        const double vel = circular_diff(obs.at(b, d), prev_rot[d]);
        const double a = inertia * (vel - prev_vel[d]);
        total += a * a;
        prev_vel[d] = vel;
        prev_rot[d] = obs.at(b, d);
      }
    }
    out[b] = total;
  }
  return out;
}

}  // namespace

double sp_accuracy(AgentPair& pair, const TrainConfig& cfg, const BodyTopology& topo,
                   const NoiseParams& noise, int batch, Rng& rng) {
  const IntentDistribution dist = cfg.distribution();
  const std::vector<int> intents = sample_intents(dist, batch, rng);
  const BatchValues values =
      collect_batch_values(pair.policy, intents, topo, noise, cfg.horizon, cfg.inertia, rng);
  const Tensor feed = extract_feed(values, pair.discriminator.mode, pair.discriminator.mode, topo, noise,
                                   cfg.inertia);
  Graph g;
  const Var probs = discriminator_forward(g, pair.discriminator, g.constant(feed));
  return batch_accuracy(g.value(probs), intents);
}

Tensor crossplay_matrix(Population& pop, int batch, Rng& rng) {
  const std::size_t n = pop.pairs.size();
  if (n == 0) throw std::invalid_argument("crossplay_matrix: empty population");
  Tensor matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng actor_rng = rng.split(1000 + i);
    const IntentDistribution dist = pop.cfg.distribution();
    const std::vector<int> intents = sample_intents(dist, batch, actor_rng);
    const BatchValues values = collect_batch_values(pop.pairs[i].policy, intents, pop.topo,
                                                    pop.noise, pop.cfg.horizon, pop.cfg.inertia,
                                                    actor_rng);
    for (std::size_t j = 0; j < n; ++j) {
      DiscriminatorNet& observer = pop.pairs[j].discriminator;
      const Tensor feed = extract_feed(values, observer.mode, observer.mode, pop.topo, pop.noise,
                                       pop.cfg.inertia);
      Graph g;
      const Var probs = discriminator_forward(g, observer, g.constant(feed));
      matrix.at(i, j) = batch_accuracy(g.value(probs), intents);
    }
  }
  return matrix;
}

double offdiagonal_mean(const Tensor& matrix) {
  if (matrix.rows() < 2) return 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < matrix.rows(); ++i)
    for (std::size_t j = 0; j < matrix.cols(); ++j)
      if (i != j) {
        sum += matrix.at(i, j);
        ++count;
      }
  return sum / static_cast<double>(count);
}

double diagonal_mean(const Tensor& matrix) {
  double sum = 0.0;
  for (std::size_t i = 0; i < matrix.rows(); ++i) sum += matrix.at(i, i);
  return sum / static_cast<double>(matrix.rows());
}

BatchValues collect_batch_values(PolicyNet& policy, std::span<const int> intents,
                                 const BodyTopology& topo, const NoiseParams& noise, int horizon,
                                 double inertia, Rng& rng) {
  Graph g;
  const RolloutBatch rb = rollout_batch(g, policy, intents, topo, noise, horizon, inertia, rng);
  BatchValues values;
  for (int t = 0; t < horizon; ++t) {
    values.observed_rotations.push_back(g.value(rb.observed_rotations[t]));
    values.observed_positions.push_back(g.value(rb.observed_positions[t]));
    values.actions.push_back(g.value(rb.actions[t]));
  }
  values.observed_flat = g.value(rb.observed_flat);
  values.energy = g.value(rb.energy);
  return values;
}

Tensor extract_feed(const BatchValues& values, InputMode net_mode, InputMode feed_kind,
                    const BodyTopology& topo, const NoiseParams& noise, double inertia) {
  (void)noise;  // the probe uses only what a third party observes
  if (net_mode == InputMode::kTrajectory) {
    if (feed_kind == InputMode::kTrajectory) return values.observed_flat;
    // Latent probe into a trajectory-sized input: scalar, zero-padded.
    Tensor feed(values.energy.rows(), values.observed_flat.cols());
    for (std::size_t b = 0; b < feed.rows(); ++b) feed.at(b, 0) = values.energy[b];
    return feed;
  }
  if (feed_kind == InputMode::kLatent) return values.energy;
  return energy_from_observed_rotations(values, topo, inertia);
}

ObserverResult external_observer_eval(Population& pop, const ObserverConfig& cfg, Rng& rng) {
  const std::size_t n = pop.pairs.size();
  if (n < 5)
    throw std::invalid_argument(
        strf("external_observer_eval: population of %zu cannot be split 80/20", n));

  // Deterministic split by agent id under the dedicated seed.
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng split_rng(cfg.split_seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = split_rng.next_u64() % (i + 1);
    std::swap(ids[i], ids[j]);
  }
  const std::size_t train_count = (n * 8) / 10;
  ObserverResult result;
  result.train_ids.assign(ids.begin(), ids.begin() + train_count);
  result.test_ids.assign(ids.begin() + train_count, ids.end());

  std::vector<std::uint64_t> checksums;
  for (auto& pair : pop.pairs)
    checksums.push_back(pair.policy.params.checksum() ^ pair.discriminator.params.checksum());

  const int feed_dim = cfg.train_feed == InputMode::kTrajectory
                           ? trajectory_feed_dim(pop.topo.joints, pop.cfg.horizon)
                           : 1;
  Rng init_rng = rng.split(0xb5e7);
  DiscriminatorNet observer =
      make_discriminator(cfg.train_feed, feed_dim, pop.cfg.intents, cfg.hidden, init_rng);
  const AdamConfig adam{cfg.lr};
  const IntentDistribution dist = pop.cfg.distribution();

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    for (int id : result.train_ids) {
      const std::vector<int> intents = sample_intents(dist, cfg.batch, rng);
      const BatchValues values =
          collect_batch_values(pop.pairs[id].policy, intents, pop.topo, pop.noise,
                               pop.cfg.horizon, pop.cfg.inertia, rng);
      const Tensor feed = extract_feed(values, cfg.train_feed, cfg.train_feed, pop.topo, pop.noise,
                                       pop.cfg.inertia);
      Graph g;
      const Var probs = discriminator_forward(g, observer, g.constant(feed));
      const Var picked = row_sum(mul(probs, g.constant([&] {
        Tensor onehot(intents.size(), pop.cfg.intents);
        for (std::size_t b = 0; b < intents.size(); ++b) onehot.at(b, intents[b]) = 1.0;
        return onehot;
      }())));
      const Var loss = scale(mean(vlog(picked, 1e-12)), -1.0);
      if (!std::isfinite(g.value(loss)[0]))
        throw std::runtime_error("external_observer_eval: non-finite observer loss");
      g.backward(loss);
      observer.params.adam_step(adam);
    }

    double acc_sum = 0.0;
    for (int id : result.test_ids) {
      const std::vector<int> intents = sample_intents(dist, cfg.batch, rng);
      const BatchValues values =
          collect_batch_values(pop.pairs[id].policy, intents, pop.topo, pop.noise,
                               pop.cfg.horizon, pop.cfg.inertia, rng);
      const Tensor feed = extract_feed(values, cfg.train_feed, cfg.test_feed, pop.topo, pop.noise,
                                       pop.cfg.inertia);
      Graph g;
      const Var probs = discriminator_forward(g, observer, g.constant(feed));
      acc_sum += batch_accuracy(g.value(probs), intents);
    }
    result.curve.emplace_back(iter, acc_sum / static_cast<double>(result.test_ids.size()));
  }

  for (std::size_t i = 0; i < pop.pairs.size(); ++i) {
    const std::uint64_t now =
        pop.pairs[i].policy.params.checksum() ^ pop.pairs[i].discriminator.params.checksum();
    if (now != checksums[i])
      throw std::logic_error("external_observer_eval: frozen actor parameters changed");
  }

  const std::size_t tail = std::max<std::size_t>(1, result.curve.size() / 10);
  double tail_sum = 0.0;
  for (std::size_t i = result.curve.size() - tail; i < result.curve.size(); ++i)
    tail_sum += result.curve[i].second;
  result.final_accuracy = result.curve.empty() ? 0.0 : tail_sum / static_cast<double>(tail);
  return result;
}

std::vector<GaussianFit> fit_intent_energy_gaussians(AgentPair& pair, const TrainConfig& cfg,
                                                     const BodyTopology& topo,
                                                     const NoiseParams& noise, int batch,
                                                     Rng& rng) {
  std::vector<GaussianFit> fits(cfg.intents);
  for (int k = 0; k < cfg.intents; ++k) {
    const std::vector<int> intents(batch, k);
    const BatchValues values =
        collect_batch_values(pair.policy, intents, topo, noise, cfg.horizon, cfg.inertia, rng);
    double mean = 0.0;
    for (std::size_t b = 0; b < values.energy.size(); ++b) mean += values.energy[b];
    mean /= static_cast<double>(batch);
    double var = 0.0;
    for (std::size_t b = 0; b < values.energy.size(); ++b) {
      const double d = values.energy[b] - mean;
      var += d * d;
    }
    var = batch > 1 ? var / static_cast<double>(batch - 1) : 0.0;
    fits[k] = {mean, std::sqrt(var)};
  }
  return fits;
}

double gaussian_overlap(const GaussianFit& a, const GaussianFit& b) {
  const double sa = std::max(a.stddev, 1e-9);
  const double sb = std::max(b.stddev, 1e-9);
  const double lo = std::min(a.mean - 6.0 * sa, b.mean - 6.0 * sb);
  const double hi = std::max(a.mean + 6.0 * sa, b.mean + 6.0 * sb);
  const int kPoints = 4001;
  const double dx = (hi - lo) / (kPoints - 1);
  auto density = [](double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.141592653589793));
  };
  double integral = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double x = lo + i * dx;
    const double m = std::min(density(x, a.mean, sa), density(x, b.mean, sb));
    integral += (i == 0 || i + 1 == kPoints) ? 0.5 * m : m;
  }
  return integral * dx;
}

EntropyEstimate conditional_entropy_estimate(std::span<const GaussianFit> fits,
                                             const IntentDistribution& prior, int samples,
                                             Rng& rng) {
  if (fits.size() != prior.probs.size())
    throw std::invalid_argument("conditional_entropy_estimate: fit/prior size mismatch");
  const std::size_t n = fits.size();
  EntropyEstimate est;
  est.h_prior = prior.entropy_nats();

  double h_sum = 0.0;
  std::vector<double> logw(n);
  for (int s = 0; s < samples; ++s) {
    const int g = rng.categorical(prior.probs);
    const double sg = std::max(fits[g].stddev, 1e-9);
    const double phi = rng.gaussian(fits[g].mean, sg);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      const double sk = std::max(fits[k].stddev, 1e-9);
      const double z = (phi - fits[k].mean) / sk;
      logw[k] = std::log(prior.probs[k]) - std::log(sk) - 0.5 * z * z;
      mx = std::max(mx, logw[k]);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += std::exp(logw[k] - mx);
    double h = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double p = std::exp(logw[k] - mx) / denom;
      if (p > 0.0) h -= p * std::log(p);
    }
    h_sum += h;
  }
  est.h_given_phi = h_sum / static_cast<double>(samples);
  return est;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  if (!crossplay.empty()) {
    out << "crossplay rows=actor cols=observer\n";
    for (std::size_t r = 0; r < crossplay.rows(); ++r)
      for (std::size_t c = 0; c < crossplay.cols(); ++c)
        out << strf("%.12g", crossplay.at(r, c)) << (c + 1 == crossplay.cols() ? '\n' : ',');
  }
  for (const auto& [name, res] : observer_cells) {
    out << "observer " << name << " final " << strf("%.12g", res.final_accuracy) << "\n";
    for (const auto& [iter, acc] : res.curve) out << iter << "," << strf("%.12g", acc) << "\n";
  }
  for (std::size_t k = 0; k < energy_fits.size(); ++k)
    for (std::size_t g = 0; g < energy_fits[k].size(); ++g)
      out << strf("gaussian agent=%zu intent=%zu %.12g %.12g\n", k, g, energy_fits[k][g].mean,
                  energy_fits[k][g].stddev);
  for (std::size_t k = 0; k < structure.size(); ++k)
    out << strf("entropy agent=%zu h_prior %.12g h_given_phi %.12g\n", k, structure[k].h_prior,
                structure[k].h_given_phi);
  return out.str();
}

std::string EnergyTrace::to_csv() const {
  std::ostringstream out;
  const std::size_t n = energy.empty() ? 0 : energy[0].size();
  out << "iteration";
  for (std::size_t k = 0; k < n; ++k) out << ",energy_intent" << k;
  for (std::size_t k = 0; k < n; ++k) out << ",rank_intent" << k;
  out << "\n";
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    out << iterations[i];
    for (std::size_t k = 0; k < n; ++k) out << "," << strf("%.12g", energy[i][k]);
    for (std::size_t k = 0; k < n; ++k) out << "," << ranks[i][k];
    out << "\n";
  }
  out << "reorder_counts";
  for (int c : reorder_counts) out << "," << c;
  out << "\n";
  return out.str();
}

EnergyTrace intent_energy_trace(const TrainLog& log, int stride) {
  if (stride < 1) throw std::invalid_argument("intent_energy_trace: stride must be >= 1");
  EnergyTrace trace;
  trace.stride = stride;
  const int n = log.intents;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != log.rows.size()) continue;
    bool finite = true;
    for (double e : log.rows[i].intent_energy)
      if (!std::isfinite(e)) finite = false;
    if (!finite) continue;  // an intent missing from the batch; skip the sample
    trace.iterations.push_back(log.rows[i].iteration);
    trace.energy.push_back(log.rows[i].intent_energy);
  }

  // Ranks come from a centered moving average so that batch noise between
  // near-equal energies does not register as repositioning.
  const int window = static_cast<int>(trace.energy.size()) / 20;  // half-width
  for (std::size_t i = 0; i < trace.energy.size(); ++i) {
    const std::size_t lo = i >= static_cast<std::size_t>(window) ? i - window : 0;
    const std::size_t hi = std::min(trace.energy.size() - 1, i + window);
    std::vector<double> smooth(n, 0.0);
    for (std::size_t j = lo; j <= hi; ++j)
      for (int k = 0; k < n; ++k) smooth[k] += trace.energy[j][k];
    // rank 0 = lowest energy; ties resolved by intent index
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return smooth[a] < smooth[b]; });
    std::vector<int> rank(n);
    for (int pos = 0; pos < n; ++pos) rank[order[pos]] = pos;
    trace.ranks.push_back(std::move(rank));
  }

  trace.reorder_counts.assign(n, 0);
  for (std::size_t i = 1; i < trace.ranks.size(); ++i)
    for (int k = 0; k < n; ++k)
      if (trace.ranks[i][k] != trace.ranks[i - 1][k]) ++trace.reorder_counts[k];

  if (!trace.energy.empty()) {
    const std::size_t half = trace.energy.size() / 2;
    std::vector<double> mean(n, 0.0);
    std::size_t rank0_hits = 0;
    for (std::size_t i = half; i < trace.energy.size(); ++i) {
      for (int k = 0; k < n; ++k) mean[k] += trace.energy[i][k];
      if (trace.ranks[i][0] == 0) ++rank0_hits;
    }
    trace.min_mean_energy_intent_final =
        static_cast<int>(std::min_element(mean.begin(), mean.end()) - mean.begin());
    trace.intent0_rank0_share_final =
        static_cast<double>(rank0_hits) / static_cast<double>(trace.energy.size() - half);
  }
  return trace;
}

}  // namespace emcomm
