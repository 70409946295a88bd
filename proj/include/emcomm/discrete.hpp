#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emcomm/intents.hpp"
#include "emcomm/tensor.hpp"

namespace emcomm {

// Toy communication channel: a fixed set of discrete actions, each with a
// scalar energy cost, and five Zipf-distributed intents.
struct DiscreteChannelSpec {
  int actions = 0;
  std::vector<double> energy;  // per action
  int intents = 5;
  IntentDistribution dist;

  // 10 actions, energy(a) = a: every action has a unique cost.
  static DiscreteChannelSpec task1();
  // 17 actions over 5 distinct energy values: one unique minimum, the
  // other four values shared by exactly four actions each.
  static DiscreteChannelSpec task2();

  void validate() const;
  bool same_task(const DiscreteChannelSpec& o) const;
};

enum class DiscreteCondition { kZipfOnly, kZipfEnergy };

std::string discrete_condition_name(DiscreteCondition c);

struct DiscretePair {
  DiscreteChannelSpec spec;
  Tensor sender_logits;    // intents x actions
  Tensor receiver_logits;  // actions x intents
  std::uint64_t seed = 0;
  DiscreteCondition condition = DiscreteCondition::kZipfOnly;
};

// Row softmax of the logit matrices.
Tensor sender_policy(const DiscretePair& pair);
Tensor receiver_policy(const DiscretePair& pair);

// Minimizes the exact expected loss
//   sum_g p(g) sum_a pi(a|g) * (-log q(g|a) + lambda * energy(a))
// by full enumeration (no sampling), jointly on both logit matrices.
// lambda is ignored (treated as 0) in the zipf-only condition.
DiscretePair train_discrete_pair(const DiscreteChannelSpec& spec, DiscreteCondition condition,
                                 double lambda, double lr, int iterations, std::uint64_t seed);

// The exact expected loss at the pair's current logits.
double discrete_expected_loss(const DiscretePair& pair, double lambda);

// Greedy self-play accuracy: argmax decoding on both sides, ties broken
// toward the lowest index, weighted by the intent prior.
double discrete_sp_accuracy(const DiscretePair& pair);

// Greedy accuracy of one pair's sender decoded by another pair's receiver.
double discrete_cp_accuracy(const DiscretePair& sender_from, const DiscretePair& receiver_from);

// Soft confusion matrix p(predicted | true) under the stochastic policies.
Tensor confusion_matrix(const DiscretePair& sender_from, const DiscretePair& receiver_from);

enum class PairingMode { kSelfPlay, kCrossPlay };

// Policy and confusion grids for plotting, as labeled comma-separated
// matrices. Cross-play mode emits every ordered sender/receiver pairing.
std::string protocol_heatmaps(std::span<const DiscretePair> pairs, PairingMode mode);

}  // namespace emcomm
