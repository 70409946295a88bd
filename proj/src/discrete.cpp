#include "emcomm/discrete.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "emcomm/graph.hpp"
#include "emcomm/params.hpp"
#include "emcomm/rng.hpp"
#include "emcomm/util.hpp"

namespace emcomm {
namespace {

Tensor row_softmax(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits.at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      out.at(r, c) = std::exp(logits.at(r, c) - mx);
      denom += out.at(r, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out.at(r, c) /= denom;
  }
  return out;
}

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < t.cols(); ++c)
    if (t.at(r, c) > t.at(r, best)) best = c;  // ties keep the lowest index
  return best;
}

std::string csv_matrix(const Tensor& t) {
  std::ostringstream out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c)
      out << strf("%.12g", t.at(r, c)) << (c + 1 == t.cols() ? '\n' : ',');
  }
  return out.str();
}

}  // namespace

DiscreteChannelSpec DiscreteChannelSpec::task1() {
  DiscreteChannelSpec spec;
  spec.actions = 10;
  spec.energy.resize(10);
  for (int a = 0; a < 10; ++a) spec.energy[a] = static_cast<double>(a);
  spec.intents = 5;
  spec.dist = zipf_probs(5, 1.0);
  return spec;
}

DiscreteChannelSpec DiscreteChannelSpec::task2() {
  DiscreteChannelSpec spec;
  spec.actions = 17;
  spec.energy = {0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4};
  spec.intents = 5;
  spec.dist = zipf_probs(5, 1.0);
  return spec;
}

void DiscreteChannelSpec::validate() const {
  if (actions < 1 || intents < 1)
    throw std::invalid_argument("discrete spec: need at least one action and one intent");
  if (energy.size() != static_cast<std::size_t>(actions))
    throw std::invalid_argument(strf("discrete spec: %zu energies for %d actions", energy.size(),
                                     actions));
  if (dist.count != intents)
    throw std::invalid_argument("discrete spec: intent distribution size mismatch");
}

bool DiscreteChannelSpec::same_task(const DiscreteChannelSpec& o) const {
  return actions == o.actions && energy == o.energy && intents == o.intents &&
         dist.probs == o.dist.probs;
}

std::string discrete_condition_name(DiscreteCondition c) {
  return c == DiscreteCondition::kZipfOnly ? "zipf" : "zipf+energy";
}

Tensor sender_policy(const DiscretePair& pair) { return row_softmax(pair.sender_logits); }
Tensor receiver_policy(const DiscretePair& pair) { return row_softmax(pair.receiver_logits); }

namespace {

// Expected-loss graph shared by training and the loss probe.
Var expected_loss_graph(Graph& g, ParamSet& ps, const DiscreteChannelSpec& spec, double lambda) {
  const int n = spec.intents;
  const int A = spec.actions;
  const Var pi = softmax(g.param(ps, "sender"));          // (n, A)
  const Var q = softmax(g.param(ps, "receiver"));         // (A, n)
  const Var neg_logq_t = scale(transpose(vlog(q)), -1.0); // (n, A), -log q(g|a)

  Tensor prior(n, A);
  for (int gi = 0; gi < n; ++gi)
    for (int a = 0; a < A; ++a) prior.at(gi, a) = spec.dist.probs[gi];
  const Var weighted = mul(pi, g.constant(std::move(prior)));  // p(g) * pi(a|g)

  Var loss = sum(mul(weighted, neg_logq_t));
  if (lambda != 0.0) {
    Tensor phi(n, A);
    for (int gi = 0; gi < n; ++gi)
      for (int a = 0; a < A; ++a) phi.at(gi, a) = spec.energy[a];
    loss = add(loss, scale(sum(mul(weighted, g.constant(std::move(phi)))), lambda));
  }
  return loss;
}

ParamSet logits_as_params(const DiscretePair& pair) {
  ParamSet ps;
  ps.add("sender", pair.sender_logits);
  ps.add("receiver", pair.receiver_logits);
  return ps;
}

}  // namespace

DiscretePair train_discrete_pair(const DiscreteChannelSpec& spec, DiscreteCondition condition,
                                 double lambda, double lr, int iterations, std::uint64_t seed) {
  spec.validate();
  const double effective_lambda = condition == DiscreteCondition::kZipfEnergy ? lambda : 0.0;

  DiscretePair pair;
  pair.spec = spec;
  pair.seed = seed;
  pair.condition = condition;
  Rng rng(seed);
  pair.sender_logits = Tensor(spec.intents, spec.actions);
  pair.receiver_logits = Tensor(spec.actions, spec.intents);
  // Near-symmetric start: the prior-weighted race for cheap actions, not
  // the initialization noise, decides which intent claims which action.
  for (double& x : pair.sender_logits.data()) x = rng.uniform(-0.01, 0.01);
  for (double& x : pair.receiver_logits.data()) x = rng.uniform(-0.01, 0.01);

  // Plain full-batch gradient descent. An adaptive optimizer renormalizes
  // the small late-phase energy gradient and collapses rare intents onto
  // shared cheap actions; with plain descent the cross-entropy barrier
  // keeps converged intents on distinct actions.
  ParamSet ps = logits_as_params(pair);
  for (int iter = 0; iter < iterations; ++iter) {
    Graph g;
    const Var loss = expected_loss_graph(g, ps, spec, effective_lambda);
    if (!std::isfinite(g.value(loss)[0]))
      throw std::runtime_error(strf("train_discrete_pair: non-finite loss at iteration %d", iter));
    g.backward(loss);
    for (int e = 0; e < 2; ++e) {
      Tensor& value = ps.value(e);
      Tensor& grad = ps.grad(e);
      for (std::size_t i = 0; i < value.size(); ++i) {
        value[i] -= lr * grad[i];
        grad[i] = 0.0;
      }
    }
  }
  pair.sender_logits = ps.value("sender");
  pair.receiver_logits = ps.value("receiver");
  return pair;
}

double discrete_expected_loss(const DiscretePair& pair, double lambda) {
  ParamSet ps = logits_as_params(pair);
  Graph g;
  return g.value(expected_loss_graph(g, ps, pair.spec, lambda))[0];
}

double discrete_sp_accuracy(const DiscretePair& pair) { return discrete_cp_accuracy(pair, pair); }

double discrete_cp_accuracy(const DiscretePair& sender_from, const DiscretePair& receiver_from) {
  if (!sender_from.spec.same_task(receiver_from.spec))
    throw std::invalid_argument("discrete_cp_accuracy: pairs trained on different specs");
  const Tensor pi = sender_policy(sender_from);
  const Tensor q = receiver_policy(receiver_from);
  double acc = 0.0;
  for (int gi = 0; gi < sender_from.spec.intents; ++gi) {
    const std::size_t action = argmax_row(pi, gi);
    const std::size_t decoded = argmax_row(q, action);
    if (decoded == static_cast<std::size_t>(gi)) acc += sender_from.spec.dist.probs[gi];
  }
  return acc;
}

Tensor confusion_matrix(const DiscretePair& sender_from, const DiscretePair& receiver_from) {
  if (!sender_from.spec.same_task(receiver_from.spec))
    throw std::invalid_argument("confusion_matrix: pairs trained on different specs");
  const Tensor pi = sender_policy(sender_from);
  const Tensor q = receiver_policy(receiver_from);
  const int n = sender_from.spec.intents;
  Tensor conf(n, n);
  for (int gi = 0; gi < n; ++gi)
    for (int a = 0; a < sender_from.spec.actions; ++a)
      for (int gp = 0; gp < n; ++gp) conf.at(gi, gp) += pi.at(gi, a) * q.at(a, gp);
  return conf;
}

std::string protocol_heatmaps(std::span<const DiscretePair> pairs, PairingMode mode) {
  if (pairs.empty()) throw std::invalid_argument("protocol_heatmaps: need at least one pair");
  std::ostringstream out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out << "sender_policy pair=" << i << " condition=" << discrete_condition_name(pairs[i].condition)
        << " seed=" << pairs[i].seed << " rows=intents cols=actions\n";
    out << csv_matrix(sender_policy(pairs[i]));
    out << "receiver_policy pair=" << i << " rows=actions cols=intents\n";
    out << csv_matrix(receiver_policy(pairs[i]));
  }
  if (mode == PairingMode::kSelfPlay) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out << "confusion sender=" << i << " receiver=" << i
          << " rows=true_intent cols=predicted_intent\n";
      out << csv_matrix(confusion_matrix(pairs[i], pairs[i]));
    }
  } else {
    for (std::size_t i = 0; i < pairs.size(); ++i)
      for (std::size_t j = 0; j < pairs.size(); ++j) {
        if (i == j) continue;
        out << "confusion sender=" << i << " receiver=" << j
            << " rows=true_intent cols=predicted_intent\n";
        out << csv_matrix(confusion_matrix(pairs[i], pairs[j]));
      }
  }
  return out.str();
}

}  // namespace emcomm
