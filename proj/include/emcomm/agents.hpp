#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emcomm/body.hpp"
#include "emcomm/graph.hpp"
#include "emcomm/params.hpp"
#include "emcomm/rng.hpp"

namespace emcomm {

// What a discriminator consumes: the flat observed trajectory, or the
// scalar latent energy of the trajectory.
enum class InputMode { kTrajectory, kLatent };

std::string input_mode_name(InputMode mode);
InputMode input_mode_from_name(const std::string& name);

// Flat feed width of a trajectory: per step, observed rotations and
// positions (3J each) plus the action (3J).
int trajectory_feed_dim(int joints, int horizon);

// 3-layer feed-forward sender: joint state (rotations then positions)
// concatenated with the one-hot intent in, per-DOF angular velocities out,
// no activation on the final layer.
struct PolicyNet {
  int joints = 0;
  int intents = 0;
  int hidden = 0;
  ParamSet params;

  int input_dim() const { return 6 * joints + intents; }
  int output_dim() const { return 3 * joints; }
};

// 3-layer feed-forward receiver with a softmax head over intents.
struct DiscriminatorNet {
  InputMode mode = InputMode::kTrajectory;
  int input_dim = 0;
  int intents = 0;
  int hidden = 0;
  ParamSet params;
};

PolicyNet make_policy(int joints, int intents, int hidden, Rng& rng);
DiscriminatorNet make_discriminator(InputMode mode, int input_dim, int intents, int hidden,
                                    Rng& rng);

// Batched forward passes building onto an existing graph.
Var policy_forward(Graph& g, PolicyNet& net, Var input);
Var discriminator_forward(Graph& g, DiscriminatorNet& net, Var input);

// Deterministic mean action for one pose and intent (no noise).
std::vector<double> policy_act(PolicyNet& net, const Pose& pose,
                               std::span<const double> intent_onehot);
// Probability vector over intents for one message. The message length must
// match the net's declared input mode.
std::vector<double> discriminate(DiscriminatorNet& net, std::span<const double> message);

// One population member: co-trained sender and receiver plus provenance.
struct AgentPair {
  int id = 0;
  std::uint64_t seed = 0;
  std::string condition;
  PolicyNet policy;
  DiscriminatorNet discriminator;
};

AgentPair make_agent_pair(int id, std::uint64_t seed, const std::string& condition, int joints,
                          int intents, int hidden, InputMode mode, int horizon);

// Optional header lines (e.g. a config-hash stamp) are written verbatim
// before the payload; the loader skips any leading '#' lines.
void save_agent(const AgentPair& agent, const std::string& path, const std::string& header = "");
AgentPair load_agent(const std::string& path);

}  // namespace emcomm
