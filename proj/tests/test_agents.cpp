#include <cstdio>
#include <filesystem>

#include <stdexcept>

#include "doctest.h"
#include "emcomm/agents.hpp"
#include "emcomm/intents.hpp"

using namespace emcomm;

namespace {

void zero_params(ParamSet& ps) {
  for (std::size_t i = 0; i < ps.count(); ++i)
    for (double& v : ps.value(static_cast<int>(i)).data()) v = 0.0;
}

}  // namespace

TEST_SUITE_BEGIN("agents");

TEST_CASE("zero-weight policy outputs zero actions") {
  Rng rng(1);
  PolicyNet net = make_policy(4, 3, 16, rng);
  zero_params(net.params);
  const BodyTopology arm = default_arm(4);
  const Pose ref = reference_pose(arm);
  const auto action = policy_act(net, ref, intent_embedding(1, 3));
  REQUIRE(action.size() == 12);
  for (double a : action) CHECK(a == 0.0);
}

TEST_CASE("policy is deterministic and sensitive to the intent bit") {
  Rng rng(2);
  PolicyNet net = make_policy(4, 3, 32, rng);
  const BodyTopology arm = default_arm(4);
  const Pose ref = reference_pose(arm);
  const auto a1 = policy_act(net, ref, intent_embedding(0, 3));
  const auto a2 = policy_act(net, ref, intent_embedding(0, 3));
  CHECK(a1 == a2);
  const auto b = policy_act(net, ref, intent_embedding(2, 3));
  bool any_different = false;
  for (std::size_t i = 0; i < a1.size(); ++i)
    if (a1[i] != b[i]) any_different = true;
  CHECK(any_different);
}

TEST_CASE("zero-weight discriminator is uniform; outputs are a distribution") {
  Rng rng(3);
  DiscriminatorNet net = make_discriminator(InputMode::kLatent, 1, 4, 16, rng);
  zero_params(net.params);
  const auto probs = discriminate(net, std::vector<double>{0.7});
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng2(4);
  DiscriminatorNet net2 = make_discriminator(InputMode::kLatent, 1, 5, 16, rng2);
  const auto p2 = discriminate(net2, std::vector<double>{123.0});
  double total = 0.0;
  for (double p : p2) {
    CHECK(p > 0.0);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("adding a constant to the final-layer bias leaves the softmax unchanged") {
  Rng rng(5);
  DiscriminatorNet net = make_discriminator(InputMode::kLatent, 1, 4, 16, rng);
  const auto before = discriminate(net, std::vector<double>{0.3});
  for (double& b : net.params.value("b3").data()) b += 7.25;
  const auto after = discriminate(net, std::vector<double>{0.3});
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i] == doctest::Approx(after[i]).epsilon(1e-12));
}

TEST_CASE("input-mode separation: wrong message lengths are rejected") {
  Rng rng(6);
  DiscriminatorNet latent = make_discriminator(InputMode::kLatent, 1, 2, 8, rng);
  DiscriminatorNet traj =
      make_discriminator(InputMode::kTrajectory, trajectory_feed_dim(4, 5), 2, 8, rng);
  const std::vector<double> flat(trajectory_feed_dim(4, 5), 0.1);
  CHECK_THROWS_AS(discriminate(latent, flat), std::invalid_argument);
  CHECK_THROWS_AS(discriminate(traj, std::vector<double>{1.0}), std::invalid_argument);
  CHECK_NOTHROW(discriminate(latent, std::vector<double>{1.0}));
  CHECK_NOTHROW(discriminate(traj, flat));
}

TEST_CASE("policy rejects mismatched intent embeddings") {
  Rng rng(7);
  PolicyNet net = make_policy(4, 3, 8, rng);
  const Pose ref = reference_pose(default_arm(4));
  CHECK_THROWS_AS(policy_act(net, ref, intent_embedding(0, 2)), std::invalid_argument);
}

TEST_CASE("agent checkpoints round-trip exactly") {
  AgentPair agent = make_agent_pair(3, 12345, "zipf,trajectory,lambda=0.01", 4, 2, 32,
                                    InputMode::kTrajectory, 5);
  // run one optimizer step so moments are nonzero
  for (std::size_t i = 0; i < agent.policy.params.count(); ++i)
    for (double& gp : agent.policy.params.grad(static_cast<int>(i)).data()) gp = 0.01;
  agent.policy.params.adam_step(AdamConfig{});

  const std::string path = std::filesystem::temp_directory_path() / "emcomm_agent_test.ckpt";
  save_agent(agent, path);
  const AgentPair loaded = load_agent(path);
  CHECK(loaded.id == agent.id);
  CHECK(loaded.seed == agent.seed);
  CHECK(loaded.condition == agent.condition);
  CHECK(loaded.discriminator.mode == agent.discriminator.mode);
  CHECK(loaded.discriminator.input_dim == agent.discriminator.input_dim);
  CHECK(loaded.policy.params.checksum() == agent.policy.params.checksum());
  CHECK(loaded.discriminator.params.checksum() == agent.discriminator.params.checksum());
  CHECK(loaded.policy.params.steps() == agent.policy.params.steps());
  std::remove(path.c_str());
}

TEST_SUITE_END();
