#include "emcomm/intents.hpp"

#include <cmath>
#include <stdexcept>

#include "emcomm/util.hpp"

namespace emcomm {

double IntentDistribution::entropy_nats() const {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

IntentDistribution zipf_probs(int n, double s) {
  if (n < 1) throw std::invalid_argument("zipf_probs: need at least one intent");
  if (s < 0.0) throw std::invalid_argument("zipf_probs: exponent must be >= 0");
  IntentDistribution dist;
  dist.count = n;
  dist.exponent = s;
  dist.probs.resize(n);
  double norm = 0.0;
  for (int k = 0; k < n; ++k) {
    dist.probs[k] = std::pow(static_cast<double>(k + 1), -s);
    norm += dist.probs[k];
  }
  for (double& p : dist.probs) p /= norm;
  return dist;
}

std::vector<int> sample_intents(const IntentDistribution& dist, int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("sample_intents: batch must be >= 1");
  std::vector<int> ids(batch);
  for (int i = 0; i < batch; ++i) ids[i] = rng.categorical(dist.probs);
  return ids;
}

std::vector<double> intent_embedding(int id, int n) {
  if (id < 0 || id >= n)
    throw std::invalid_argument(strf("intent_embedding: id %d out of range [0,%d)", id, n));
  std::vector<double> onehot(n, 0.0);
  onehot[id] = 1.0;
  return onehot;
}

}  // namespace emcomm
