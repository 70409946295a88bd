#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "emcomm/protocol.hpp"
#include "test_support.hpp"

using namespace emcomm;
using emcomm::testing::close_rel;
using emcomm::testing::finite_diff;

namespace {

NoiseParams no_noise() {
  NoiseParams n;
  n.sigma_p = n.sigma_r = n.sigma_a = 0.0;
  return n;
}

TrainConfig mini_config(int intents, double lambda, InputMode mode) {
  TrainConfig cfg;
  cfg.intents = intents;
  cfg.uniform = false;
  cfg.lambda_energy = lambda;
  cfg.horizon = 5;
  cfg.batch = 64;
  cfg.hidden = 32;
  cfg.iterations = 0;
  cfg.input_mode = mode;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("protocol");

TEST_CASE("energy loss: hand-evaluated cases") {
  const std::vector<std::vector<double>> constant_vel = {{1}, {1}, {1}};
  const double inertia1[] = {1.0};
  // accelerations are [1, 0, 0] starting from rest
  CHECK(energy_loss(constant_vel, inertia1) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<std::vector<double>> zeros = {{0, 0}, {0, 0}};
  const double inertia2[] = {1.0, 1.0};
  CHECK(energy_loss(zeros, inertia2) == 0.0);

  const std::vector<std::vector<double>> wiggle = {{0.5, -1.0}, {0.2, 0.3}};
  const double doubled[] = {2.0, 2.0};
  CHECK(energy_loss(wiggle, doubled) == doctest::Approx(4.0 * energy_loss(wiggle, inertia2)));

  const double wrong_size[] = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(energy_loss(wiggle, wrong_size), std::invalid_argument);
}

TEST_CASE("prediction loss: exact values and the clamp floor") {
  CHECK(prediction_loss(std::vector<double>{0.0, 1.0}, 1) == 0.0);
  const std::vector<double> uniform10(10, 0.1);
  CHECK(prediction_loss(uniform10, 3) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(prediction_loss(std::vector<double>{0.5, 0.5}, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(prediction_loss(std::vector<double>{1.0, 0.0}, 1) ==
        doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
  CHECK_THROWS_AS(prediction_loss(uniform10, 10), std::invalid_argument);
}

TEST_CASE("noiseless zero-weight rollout stays at the reference pose") {
  Rng rng(1);
  PolicyNet policy = make_policy(4, 2, 16, rng);
  for (std::size_t i = 0; i < policy.params.count(); ++i)
    for (double& v : policy.params.value(static_cast<int>(i)).data()) v = 0.0;
  const BodyTopology arm = default_arm(4);
  const Pose ref = reference_pose(arm);
  Rng roll_rng(2);
  const Trajectory traj = rollout(policy, 0, arm, no_noise(), 5, roll_rng);
  CHECK(traj.energy == 0.0);
  for (const auto& rot : traj.rotations) CHECK(rot == ref.rotations);
  for (const auto& pos : traj.positions) CHECK(pos == ref.positions);
  CHECK(latent_energy(traj) == 0.0);
}

TEST_CASE("fixed seed gives a bit-identical trajectory") {
  Rng rng(3);
  PolicyNet policy = make_policy(4, 2, 16, rng);
  const BodyTopology arm = default_arm(4);
  NoiseParams noise;  // defaults: sigma_p 2.0, sigma_r 0.4, sigma_a 0.4
  Rng r1(55), r2(55);
  const Trajectory a = rollout(policy, 1, arm, noise, 5, r1);
  const Trajectory b = rollout(policy, 1, arm, noise, 5, r2);
  CHECK(a.energy == b.energy);
  for (int t = 0; t < 5; ++t) {
    CHECK(a.rotations[t] == b.rotations[t]);
    CHECK(a.actions[t] == b.actions[t]);
    CHECK(a.observed_rotations[t] == b.observed_rotations[t]);
    CHECK(a.observed_positions[t] == b.observed_positions[t]);
  }
}

TEST_CASE("trajectory invariants: states follow fk_step, energy matches the stored actions") {
  Rng rng(4);
  PolicyNet policy = make_policy(4, 3, 16, rng);
  const BodyTopology arm = default_arm(4);
  NoiseParams noise;
  Rng roll_rng(5);
  const Trajectory traj = rollout(policy, 2, arm, noise, 5, roll_rng);

  Pose pose = reference_pose(arm);
  for (int t = 0; t < 5; ++t) {
    pose = fk_step(pose, traj.actions[t], arm);
    for (int i = 0; i < 12; ++i) {
      CHECK(traj.rotations[t][i] == doctest::Approx(pose.rotations[i]).epsilon(1e-12));
      CHECK(traj.positions[t][i] == doctest::Approx(pose.positions[i]).epsilon(1e-9));
    }
  }
  const std::vector<double> inertia(12, 1.0);
  CHECK(traj.energy == doctest::Approx(energy_loss(traj.actions, inertia)).epsilon(1e-9));
  CHECK(latent_energy(traj) == traj.energy);
  CHECK(traj.energy > 0.0);
}

TEST_CASE("observed energy equals stored energy when observation noise is off") {
  Rng rng(6);
  PolicyNet policy = make_policy(3, 2, 16, rng);
  // small weights keep per-step velocities below the wrap ambiguity
  for (std::size_t i = 0; i < policy.params.count(); ++i)
    for (double& v : policy.params.value(static_cast<int>(i)).data()) v *= 0.05;
  const BodyTopology arm = default_arm(3);
  NoiseParams noise = no_noise();
  noise.sigma_a = 0.1;
  Rng roll_rng(7);
  const Trajectory traj = rollout(policy, 0, arm, noise, 5, roll_rng);
  CHECK(observed_energy(traj, arm) == doctest::Approx(traj.energy).epsilon(1e-9));
}

TEST_CASE("rollout energy gradient matches finite differences with frozen noise") {
  Rng rng(8);
  PolicyNet policy = make_policy(2, 2, 8, rng);
  const BodyTopology arm = default_arm(2);
  NoiseParams noise;
  const std::vector<int> intents = {0, 1};

  auto energy_value = [&](PolicyNet& net) {
    Rng frozen(99);
    Graph g;
    const RolloutBatch rb = rollout_batch(g, net, intents, arm, noise, 3, 1.0, frozen);
    return g.value(mean(rb.energy))[0];
  };

  Graph g;
  Rng frozen(99);
  const RolloutBatch rb = rollout_batch(g, policy, intents, arm, noise, 3, 1.0, frozen);
  policy.params.zero_grads();
  g.backward(mean(rb.energy));

  Rng pick(11);
  const int entry = policy.params.index_of("W1");
  for (int k = 0; k < 6; ++k) {
    const std::size_t coord = pick.next_u64() % policy.params.value(entry).size();
    const double analytic = policy.params.grad(entry)[coord];
    PolicyNet probe = policy;
    const double fd = finite_diff([&] { return energy_value(probe); },
                                  &probe.params.value(entry).data()[coord]);
    CHECK_MESSAGE(close_rel(analytic, fd, 1e-4, 1e-9), "coord ", coord, ": ", analytic, " vs ", fd);
  }
}

TEST_CASE("total loss decomposes exactly into prediction plus lambda energy") {
  Rng rng(12);
  AgentPair pair = make_agent_pair(0, 500, "", 4, 2, 16, InputMode::kTrajectory, 5);
  const BodyTopology arm = default_arm(4);
  NoiseParams noise;
  const std::vector<int> intents = {0, 1, 1, 0};
  Graph g;
  Rng roll(13);
  const RolloutBatch rb = rollout_batch(g, pair.policy, intents, arm, noise, 5, 1.0, roll);
  const Var probs = discriminator_forward(g, pair.discriminator, rb.observed_flat);
  Tensor onehot(4, 2);
  for (int i = 0; i < 4; ++i) onehot.at(i, intents[i]) = 1.0;
  const Var loss_pred = scale(mean(vlog(row_sum(mul(probs, g.constant(onehot))), 1e-12)), -1.0);
  const Var loss_energy = mean(rb.energy);
  const double lambda = 0.01;
  const Var total = add(loss_pred, scale(loss_energy, lambda));
  CHECK(g.value(total)[0] ==
        doctest::Approx(g.value(loss_pred)[0] + lambda * g.value(loss_energy)[0]).epsilon(1e-15));
}

TEST_CASE("with lambda = 0 the prediction gradient still reaches the policy") {
  AgentPair pair = make_agent_pair(0, 600, "", 4, 2, 16, InputMode::kTrajectory, 5);
  TrainConfig cfg = mini_config(2, 0.0, InputMode::kTrajectory);
  cfg.iterations = 1;
  cfg.batch = 16;
  const std::uint64_t before = pair.policy.params.checksum();
  Rng rng(14);
  train_selfplay(pair, cfg, default_arm(4), NoiseParams{}, rng);
  CHECK(pair.policy.params.checksum() != before);
}

TEST_CASE("zero training iterations leave parameters unchanged") {
  AgentPair pair = make_agent_pair(0, 700, "", 4, 2, 16, InputMode::kTrajectory, 5);
  TrainConfig cfg = mini_config(2, 0.01, InputMode::kTrajectory);
  const std::uint64_t policy_before = pair.policy.params.checksum();
  const std::uint64_t disc_before = pair.discriminator.params.checksum();
  Rng rng(15);
  const TrainLog log = train_selfplay(pair, cfg, default_arm(4), NoiseParams{}, rng);
  CHECK(log.rows.empty());
  CHECK(pair.policy.params.checksum() == policy_before);
  CHECK(pair.discriminator.params.checksum() == disc_before);
}

TEST_CASE("identical seeds and config give identical training logs") {
  auto run = [] {
    AgentPair pair = make_agent_pair(0, 800, "", 4, 2, 16, InputMode::kTrajectory, 5);
    TrainConfig cfg = mini_config(2, 0.01, InputMode::kTrajectory);
    cfg.iterations = 5;
    cfg.batch = 16;
    Rng rng(16);
    return train_selfplay(pair, cfg, default_arm(4), NoiseParams{}, rng).to_csv();
  };
  CHECK(run() == run());
}

TEST_CASE("mini self-play converges on two uniform intents") {
  AgentPair pair = make_agent_pair(0, 900, "", 4, 2, 32, InputMode::kTrajectory, 5);
  TrainConfig cfg = mini_config(2, 0.0, InputMode::kTrajectory);
  cfg.uniform = true;
  cfg.iterations = 250;
  cfg.batch = 64;
  cfg.hidden = 32;
  Rng rng(17);
  const TrainLog log = train_selfplay(pair, cfg, default_arm(4), NoiseParams{}, rng);
  double tail = 0.0;
  for (int i = 0; i < 25; ++i) tail += log.rows[log.rows.size() - 1 - i].accuracy;
  CHECK(tail / 25.0 >= 0.85);
}

TEST_CASE("torque curriculum lowers energy and never touches a discriminator") {
  AgentPair pair = make_agent_pair(0, 1000, "", 4, 3, 32, InputMode::kTrajectory, 5);
  const std::uint64_t disc_before = pair.discriminator.params.checksum();
  TrainConfig cfg = mini_config(3, 0.0, InputMode::kTrajectory);
  CurriculumConfig curriculum;
  curriculum.iterations = 120;
  curriculum.batch = 32;
  curriculum.lr = 1e-3;
  curriculum.energy_threshold = 1e9;  // threshold handling tested separately
  Rng rng(18);
  const CurriculumResult res =
      pretrain_torque_curriculum(pair.policy, cfg, curriculum, default_arm(4), NoiseParams{}, rng);
  CHECK(pair.discriminator.params.checksum() == disc_before);
  CHECK(res.final_energy < res.initial_energy);
  CHECK(res.reached_threshold);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  AgentPair pair = make_agent_pair(0, 1100, "", 4, 2, 16, InputMode::kLatent, 5);
  // blow up the policy so the rollout energy overflows
  for (double& v : pair.policy.params.value("W1").data()) v = 1e160;
  for (double& v : pair.policy.params.value("W3").data()) v = 1e160;
  TrainConfig cfg = mini_config(2, 1.0, InputMode::kLatent);
  cfg.iterations = 2;
  cfg.batch = 8;
  Rng rng(19);
  CHECK_THROWS_AS(train_selfplay(pair, cfg, default_arm(4), NoiseParams{}, rng),
                  std::runtime_error);
}

TEST_SUITE_END();
