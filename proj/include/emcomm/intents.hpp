#pragma once

#include <vector>

#include "emcomm/rng.hpp"

namespace emcomm {

// Rank-frequency prior over the intent library: probs[k] proportional to
// 1/(k+1)^s. s = 0 gives the uniform ablation. Immutable once built.
struct IntentDistribution {
  int count = 0;
  double exponent = 1.0;
  std::vector<double> probs;

  double entropy_nats() const;
  double max_class_prob() const { return probs.empty() ? 0.0 : probs[0]; }
};

IntentDistribution zipf_probs(int n, double s);

std::vector<int> sample_intents(const IntentDistribution& dist, int batch, Rng& rng);

// One-hot embedding of length n.
std::vector<double> intent_embedding(int id, int n);

}  // namespace emcomm
