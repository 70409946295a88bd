#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "emcomm/evaluation.hpp"
#include "test_support.hpp"

using namespace emcomm;

namespace {

Population tiny_population(int members, int intents, InputMode mode, std::uint64_t seed) {
  Population pop;
  pop.topo = default_arm(4);
  pop.noise = NoiseParams{};
  pop.cfg.intents = intents;
  pop.cfg.horizon = 5;
  pop.cfg.batch = 32;
  pop.cfg.hidden = 16;
  pop.cfg.input_mode = mode;
  for (int k = 0; k < members; ++k)
    pop.pairs.push_back(make_agent_pair(k, seed + k, "", 4, intents, 16, mode, 5));
  return pop;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("cross-play of a single untrained pair is a 1x1 matrix equal to its SP accuracy") {
  Population pop = tiny_population(1, 2, InputMode::kTrajectory, 40);
  Rng rng(1);
  const Tensor m = crossplay_matrix(pop, 64, rng);
  CHECK(m.rows() == 1);
  Rng rng2(1);
  Rng actor_rng = rng2.split(1000);
  const IntentDistribution dist = pop.cfg.distribution();
  const std::vector<int> intents = sample_intents(dist, 64, actor_rng);
  // the single entry is a plain self-play accuracy in [0, 1]
  CHECK(m.at(0, 0) >= 0.0);
  CHECK(m.at(0, 0) <= 1.0);
  CHECK(diagonal_mean(m) == m.at(0, 0));
}

TEST_CASE("random observers sit at or below the max-class baseline") {
  Population pop = tiny_population(4, 5, InputMode::kTrajectory, 50);
  Rng rng(2);
  const Tensor m = crossplay_matrix(pop, 256, rng);
  const double max_class = pop.cfg.distribution().max_class_prob();
  CHECK(offdiagonal_mean(m) <= max_class + 0.05);
}

TEST_CASE("observer split: integrity, determinism, frozen actors, small populations rejected") {
  Population pop = tiny_population(5, 2, InputMode::kLatent, 60);
  ObserverConfig ocfg;
  ocfg.train_feed = InputMode::kLatent;
  ocfg.test_feed = InputMode::kLatent;
  ocfg.iterations = 3;
  ocfg.batch = 16;
  ocfg.hidden = 8;
  std::vector<std::uint64_t> sums;
  for (auto& pair : pop.pairs) sums.push_back(pair.policy.params.checksum());

  Rng rng(3);
  const ObserverResult res = external_observer_eval(pop, ocfg, rng);
  CHECK(res.train_ids.size() == 4);
  CHECK(res.test_ids.size() == 1);
  for (int id : res.train_ids)
    for (int test : res.test_ids) CHECK(id != test);
  CHECK(res.curve.size() == 3);
  for (std::size_t i = 0; i < pop.pairs.size(); ++i)
    CHECK(pop.pairs[i].policy.params.checksum() == sums[i]);

  Rng rng2(3);
  const ObserverResult res2 = external_observer_eval(pop, ocfg, rng2);
  CHECK(res2.train_ids == res.train_ids);  // dedicated split seed
  CHECK(res2.final_accuracy == res.final_accuracy);

  Population small = tiny_population(4, 2, InputMode::kLatent, 70);
  Rng rng3(4);
  CHECK_THROWS_AS(external_observer_eval(small, ocfg, rng3), std::invalid_argument);
}

TEST_CASE("feed extraction covers the four probe combinations") {
  Population pop = tiny_population(1, 2, InputMode::kTrajectory, 80);
  Rng rng(5);
  const std::vector<int> intents = {0, 1, 1};
  const BatchValues values = collect_batch_values(pop.pairs[0].policy, intents, pop.topo,
                                                  pop.noise, 5, 1.0, rng);
  const int flat_dim = trajectory_feed_dim(4, 5);
  const Tensor tt =
      extract_feed(values, InputMode::kTrajectory, InputMode::kTrajectory, pop.topo, pop.noise, 1.0);
  CHECK(tt.cols() == static_cast<std::size_t>(flat_dim));
  const Tensor tl =
      extract_feed(values, InputMode::kTrajectory, InputMode::kLatent, pop.topo, pop.noise, 1.0);
  CHECK(tl.cols() == static_cast<std::size_t>(flat_dim));
  CHECK(tl.at(0, 0) == values.energy[0]);  // scalar, zero-padded
  for (std::size_t c = 1; c < tl.cols(); ++c) CHECK(tl.at(1, c) == 0.0);
  const Tensor ll =
      extract_feed(values, InputMode::kLatent, InputMode::kLatent, pop.topo, pop.noise, 1.0);
  CHECK(ll.cols() == 1);
  CHECK(ll[0] == values.energy[0]);
  const Tensor lt =
      extract_feed(values, InputMode::kLatent, InputMode::kTrajectory, pop.topo, pop.noise, 1.0);
  CHECK(lt.cols() == 1);
  // recomputed from noisy observations: correlated with but not equal to the stored energy
  CHECK(lt[0] != values.energy[0]);

  // with observation noise off, the recomputed probe reduces to the stored energy
  NoiseParams quiet = pop.noise;
  quiet.sigma_r = quiet.sigma_p = 0.0;
  quiet.sigma_a = 0.1;
  Population calm = tiny_population(1, 2, InputMode::kTrajectory, 81);
  for (std::size_t i = 0; i < calm.pairs[0].policy.params.count(); ++i)
    for (double& v : calm.pairs[0].policy.params.value(static_cast<int>(i)).data()) v *= 0.05;
  Rng rng2(6);
  const BatchValues calm_values =
      collect_batch_values(calm.pairs[0].policy, intents, calm.topo, quiet, 5, 1.0, rng2);
  const Tensor calm_probe =
      extract_feed(calm_values, InputMode::kLatent, InputMode::kTrajectory, calm.topo, quiet, 1.0);
  for (std::size_t b = 0; b < calm_probe.size(); ++b)
    CHECK(calm_probe[b] == doctest::Approx(calm_values.energy[b]).epsilon(1e-9));
}

TEST_CASE("gaussian fits: zero-energy policy gives zero means and stds; batches agree") {
  Population pop = tiny_population(1, 2, InputMode::kTrajectory, 90);
  for (std::size_t i = 0; i < pop.pairs[0].policy.params.count(); ++i)
    for (double& v : pop.pairs[0].policy.params.value(static_cast<int>(i)).data()) v = 0.0;
  NoiseParams quiet;
  quiet.sigma_a = quiet.sigma_p = quiet.sigma_r = 0.0;
  pop.noise = quiet;
  Rng rng(6);
  const auto fits = fit_intent_energy_gaussians(pop.pairs[0], pop.cfg, pop.topo, pop.noise, 16, rng);
  for (const auto& fit : fits) {
    CHECK(fit.mean == 0.0);
    CHECK(fit.stddev == 0.0);
  }

  Population noisy = tiny_population(1, 2, InputMode::kTrajectory, 91);
  Rng ra(7), rb(8);
  const auto fa = fit_intent_energy_gaussians(noisy.pairs[0], noisy.cfg, noisy.topo, noisy.noise,
                                              512, ra);
  const auto fb = fit_intent_energy_gaussians(noisy.pairs[0], noisy.cfg, noisy.topo, noisy.noise,
                                              512, rb);
  for (int g = 0; g < 2; ++g) {
    const double se = fa[g].stddev / std::sqrt(512.0);
    CHECK(std::abs(fa[g].mean - fb[g].mean) < 3.0 * se + 1e-9);
  }
}

TEST_CASE("gaussian overlap: identical distributions overlap fully, distant ones not at all") {
  const GaussianFit a{0.0, 1.0};
  CHECK(gaussian_overlap(a, a) == doctest::Approx(1.0).epsilon(1e-3));
  const GaussianFit far{10.0, 1.0};
  CHECK(gaussian_overlap(a, far) < 1e-4);
  const GaussianFit close{1.0, 1.0};
  CHECK(gaussian_overlap(a, close) > 0.3);
}

TEST_CASE("conditional entropy: uninformative and separated limits, quadrature oracle") {
  const IntentDistribution prior = zipf_probs(2, 0.0);  // equiprobable
  Rng rng(9);

  const std::vector<GaussianFit> same = {{5.0, 1.0}, {5.0, 1.0}};
  const EntropyEstimate identical = conditional_entropy_estimate(same, prior, 20000, rng);
  CHECK(identical.h_given_phi == doctest::Approx(identical.h_prior).epsilon(1e-9));

  const std::vector<GaussianFit> apart = {{0.0, 1.0}, {10.0, 1.0}};
  Rng rng2(10);
  const EntropyEstimate separated = conditional_entropy_estimate(apart, prior, 20000, rng2);
  CHECK(separated.h_given_phi < 0.01);

  // quadrature oracle for the separated case: integrate the mixture
  // entropy term on a fine grid
  double oracle = 0.0;
  const double lo = -8.0, hi = 18.0;
  const int steps = 200000;
  const double dx = (hi - lo) / steps;
  auto density = [](double x, double mu) {
    return std::exp(-0.5 * (x - mu) * (x - mu)) / std::sqrt(2.0 * 3.141592653589793);
  };
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + i * dx;
    const double p0 = 0.5 * density(x, 0.0), p1 = 0.5 * density(x, 10.0);
    const double mix = p0 + p1;
    if (mix <= 0.0) continue;
    double h = 0.0;
    for (double pk : {p0 / mix, p1 / mix})
      if (pk > 0.0) h -= pk * std::log(pk);
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    oracle += w * mix * h * dx;
  }
  CHECK(separated.h_given_phi == doctest::Approx(oracle).epsilon(0.25));
  CHECK(oracle < 0.01);

  const std::vector<GaussianFit> wrong_size = {{0.0, 1.0}};
  Rng rng3(11);
  CHECK_THROWS_AS(conditional_entropy_estimate(wrong_size, prior, 100, rng3),
                  std::invalid_argument);
}

TEST_CASE("energy trace: constant energies never reorder; synthetic swaps are counted") {
  TrainLog log;
  log.intents = 3;
  for (int i = 0; i < 30; ++i) {
    TrainLogRow row;
    row.iteration = i;
    row.intent_energy = {1.0, 2.0, 3.0};
    log.rows.push_back(row);
  }
  const EnergyTrace constant = intent_energy_trace(log, 5);
  for (int c : constant.reorder_counts) CHECK(c == 0);
  CHECK(constant.min_mean_energy_intent_final == 0);
  CHECK(constant.intent0_rank0_share_final == 1.0);

  TrainLog swapping;
  swapping.intents = 2;
  for (int i = 0; i < 10; ++i) {
    TrainLogRow row;
    row.iteration = i;
    row.intent_energy = i % 2 == 0 ? std::vector<double>{1.0, 2.0} : std::vector<double>{2.0, 1.0};
    swapping.rows.push_back(row);
  }
  const EnergyTrace swapped = intent_energy_trace(swapping, 1);
  CHECK(swapped.reorder_counts[0] == 9);
  CHECK(swapped.reorder_counts[1] == 9);
}

TEST_SUITE_END();
