#include <cmath>
#include <map>

#include <stdexcept>

#include "doctest.h"
#include "emcomm/discrete.hpp"
#include "emcomm/graph.hpp"
#include "emcomm/params.hpp"
#include "emcomm/rng.hpp"
#include "test_support.hpp"

using namespace emcomm;
using emcomm::testing::close_rel;

namespace {

// Independent greedy-decoding oracle: exhaustive argmax loops written from
// the definition, not sharing the implementation's helpers.
double oracle_greedy_accuracy(const Tensor& sender_probs, const Tensor& receiver_probs,
                              std::span<const double> prior) {
  double acc = 0.0;
  for (std::size_t g = 0; g < sender_probs.rows(); ++g) {
    std::size_t a_star = 0;
    for (std::size_t a = 0; a < sender_probs.cols(); ++a)
      if (sender_probs.at(g, a) > sender_probs.at(g, a_star)) a_star = a;
    std::size_t g_hat = 0;
    for (std::size_t gp = 0; gp < receiver_probs.cols(); ++gp)
      if (receiver_probs.at(a_star, gp) > receiver_probs.at(a_star, g_hat)) g_hat = gp;
    if (g_hat == g) acc += prior[g];
  }
  return acc;
}

DiscretePair hand_pair(const DiscreteChannelSpec& spec,
                       const std::vector<int>& intent_to_action) {
  DiscretePair pair;
  pair.spec = spec;
  pair.sender_logits = Tensor(spec.intents, spec.actions, 0.0);
  pair.receiver_logits = Tensor(spec.actions, spec.intents, 0.0);
  for (int g = 0; g < spec.intents; ++g) {
    pair.sender_logits.at(g, intent_to_action[g]) = 25.0;
    pair.receiver_logits.at(intent_to_action[g], g) = 25.0;
  }
  return pair;
}

}  // namespace

TEST_SUITE_BEGIN("discrete");

TEST_CASE("task specs match their structure") {
  const DiscreteChannelSpec t1 = DiscreteChannelSpec::task1();
  t1.validate();
  CHECK(t1.actions == 10);
  CHECK(t1.intents == 5);
  for (int a = 0; a < 10; ++a) CHECK(t1.energy[a] == static_cast<double>(a));

  const DiscreteChannelSpec t2 = DiscreteChannelSpec::task2();
  t2.validate();
  CHECK(t2.actions == 17);
  std::map<double, int> degeneracy;
  for (double e : t2.energy) degeneracy[e]++;
  CHECK(degeneracy.size() == 5);
  CHECK(degeneracy.begin()->second == 1);  // unique lowest value
  for (auto it = std::next(degeneracy.begin()); it != degeneracy.end(); ++it)
    CHECK(it->second == 4);
}

TEST_CASE("identity protocol scores 1.0; constant sender scores the max class") {
  const DiscreteChannelSpec spec = DiscreteChannelSpec::task1();
  const DiscretePair identity = hand_pair(spec, {0, 1, 2, 3, 4});
  CHECK(discrete_sp_accuracy(identity) == doctest::Approx(1.0).epsilon(1e-9));

  const DiscretePair collapsed = hand_pair(spec, {0, 0, 0, 0, 0});
  // every intent maps to action 0; the receiver decodes it as one intent
  CHECK(discrete_sp_accuracy(collapsed) == doctest::Approx(0.438).epsilon(0.01));
}

TEST_CASE("greedy evaluation matches the exhaustive oracle on random logits") {
  const DiscreteChannelSpec spec = DiscreteChannelSpec::task1();
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    DiscretePair a, b;
    a.spec = b.spec = spec;
    a.sender_logits = Tensor(5, 10);
    a.receiver_logits = Tensor(10, 5);
    b.sender_logits = Tensor(5, 10);
    b.receiver_logits = Tensor(10, 5);
    for (Tensor* t : {&a.sender_logits, &a.receiver_logits, &b.sender_logits, &b.receiver_logits})
      for (double& v : t->data()) v = rng.uniform(-2, 2);
    const double impl = discrete_cp_accuracy(a, b);
    const double oracle = oracle_greedy_accuracy(sender_policy(a), receiver_policy(b),
                                                 spec.dist.probs);
    CHECK(impl == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("cp of a pair with itself is its sp accuracy; mismatched specs rejected") {
  const DiscretePair pair =
      train_discrete_pair(DiscreteChannelSpec::task1(), DiscreteCondition::kZipfEnergy, 0.05, 1.0,
                          200, 42);
  CHECK(discrete_cp_accuracy(pair, pair) == discrete_sp_accuracy(pair));

  const DiscretePair other =
      train_discrete_pair(DiscreteChannelSpec::task2(), DiscreteCondition::kZipfOnly, 0.0, 1.0,
                          50, 1);
  CHECK_THROWS_AS(discrete_cp_accuracy(pair, other), std::invalid_argument);
}

TEST_CASE("expected-loss gradients match finite differences to 1e-6") {
  const DiscreteChannelSpec spec = DiscreteChannelSpec::task1();
  const double lambda = 0.05;
  DiscretePair pair;
  pair.spec = spec;
  Rng rng(9);
  pair.sender_logits = Tensor(5, 10);
  pair.receiver_logits = Tensor(10, 5);
  for (double& v : pair.sender_logits.data()) v = rng.uniform(-1, 1);
  for (double& v : pair.receiver_logits.data()) v = rng.uniform(-1, 1);

  ParamSet ps;
  ps.add("sender", pair.sender_logits);
  ps.add("receiver", pair.receiver_logits);
  Graph g;
  const Var pi = softmax(g.param(ps, "sender"));
  const Var q = softmax(g.param(ps, "receiver"));
  Tensor prior(5, 10), phi(5, 10);
  for (int gi = 0; gi < 5; ++gi)
    for (int a = 0; a < 10; ++a) {
      prior.at(gi, a) = spec.dist.probs[gi];
      phi.at(gi, a) = spec.energy[a];
    }
  const Var weighted = mul(pi, g.constant(prior));
  const Var loss = add(sum(mul(weighted, scale(transpose(vlog(q)), -1.0))),
                       scale(sum(mul(weighted, g.constant(phi))), lambda));
  g.backward(loss);

  Rng pick(10);
  for (int k = 0; k < 12; ++k) {
    const int entry = static_cast<int>(pick.next_u64() % 2);
    const std::size_t coord = pick.next_u64() % ps.value(entry).size();
    DiscretePair probe = pair;
    Tensor& target = entry == 0 ? probe.sender_logits : probe.receiver_logits;
    const double fd = emcomm::testing::finite_diff(
        [&] { return discrete_expected_loss(probe, lambda); }, &target.data()[coord], 1e-6);
    CHECK_MESSAGE(close_rel(ps.grad(entry)[coord], fd, 1e-6, 1e-10), "entry ", entry, " coord ",
                  coord);
  }
}

TEST_CASE("symmetric all-zero initialization stays at the uniform-sender saddle") {
  const DiscreteChannelSpec spec = DiscreteChannelSpec::task1();
  // Hand gradient at the symmetric point: with uniform q the per-action
  // cost is constant in a, so the sender gradient vanishes identically.
  DiscretePair pair;
  pair.spec = spec;
  pair.sender_logits = Tensor(5, 10, 0.0);
  pair.receiver_logits = Tensor(10, 5, 0.0);
  ParamSet ps;
  ps.add("sender", pair.sender_logits);
  ps.add("receiver", pair.receiver_logits);
  Graph g;
  const Var pi = softmax(g.param(ps, "sender"));
  const Var q = softmax(g.param(ps, "receiver"));
  Tensor prior(5, 10);
  for (int gi = 0; gi < 5; ++gi)
    for (int a = 0; a < 10; ++a) prior.at(gi, a) = spec.dist.probs[gi];
  g.backward(sum(mul(mul(pi, g.constant(prior)), scale(transpose(vlog(q)), -1.0))));
  for (std::size_t i = 0; i < ps.grad(0).size(); ++i) CHECK(ps.grad(0)[i] == doctest::Approx(0.0));

  // Training from the saddle keeps the sender uniform: every row stays flat.
  ParamSet ps2;
  ps2.add("sender", Tensor(5, 10, 0.0));
  ps2.add("receiver", Tensor(10, 5, 0.0));
  const AdamConfig adam{0.05};
  for (int iter = 0; iter < 100; ++iter) {
    Graph g2;
    const Var pi2 = softmax(g2.param(ps2, "sender"));
    const Var q2 = softmax(g2.param(ps2, "receiver"));
    g2.backward(sum(mul(mul(pi2, g2.constant(prior)), scale(transpose(vlog(q2)), -1.0))));
    ps2.adam_step(adam);
  }
  const Tensor& sender = ps2.value("sender");
  for (std::size_t r = 0; r < sender.rows(); ++r)
    for (std::size_t c = 1; c < sender.cols(); ++c)
      CHECK(sender.at(r, c) == doctest::Approx(sender.at(r, 0)).epsilon(1e-9));
}

TEST_CASE("zero iterations leave the logits at their initialization") {
  const DiscretePair a =
      train_discrete_pair(DiscreteChannelSpec::task1(), DiscreteCondition::kZipfOnly, 0.0, 1.0,
                          0, 7);
  const DiscretePair b =
      train_discrete_pair(DiscreteChannelSpec::task1(), DiscreteCondition::kZipfOnly, 0.0, 1.0,
                          0, 7);
  for (std::size_t i = 0; i < a.sender_logits.size(); ++i)
    CHECK(a.sender_logits[i] == b.sender_logits[i]);
  CHECK(a.sender_logits[0] != 0.0);  // initialization breaks symmetry
}

TEST_CASE("confusion matrices are conditional distributions") {
  const DiscreteChannelSpec spec = DiscreteChannelSpec::task1();
  const DiscretePair identity = hand_pair(spec, {0, 1, 2, 3, 4});
  const Tensor conf = confusion_matrix(identity, identity);
  for (int g = 0; g < 5; ++g) {
    double row = 0.0;
    for (int p = 0; p < 5; ++p) row += conf.at(g, p);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(conf.at(g, g) == doctest::Approx(1.0).epsilon(1e-6));
  }

  const DiscretePair trained =
      train_discrete_pair(spec, DiscreteCondition::kZipfEnergy, 0.05, 1.0, 300, 3);
  const Tensor conf2 = confusion_matrix(trained, trained);
  for (int g = 0; g < 5; ++g) {
    double row = 0.0;
    for (int p = 0; p < 5; ++p) row += conf2.at(g, p);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("heatmap report covers policies and pairings") {
  std::vector<DiscretePair> pairs;
  for (std::uint64_t s = 0; s < 2; ++s)
    pairs.push_back(train_discrete_pair(DiscreteChannelSpec::task1(),
                                        DiscreteCondition::kZipfEnergy, 0.05, 1.0, 100, s));
  const std::string sp = protocol_heatmaps(pairs, PairingMode::kSelfPlay);
  CHECK(sp.find("sender_policy pair=0") != std::string::npos);
  CHECK(sp.find("confusion sender=1 receiver=1") != std::string::npos);
  const std::string cp = protocol_heatmaps(pairs, PairingMode::kCrossPlay);
  CHECK(cp.find("confusion sender=0 receiver=1") != std::string::npos);
  CHECK(cp.find("confusion sender=0 receiver=0") == std::string::npos);
}

TEST_CASE("zipf+energy senders put the rank-1 intent on the lowest-energy action") {
  const DiscreteChannelSpec spec = DiscreteChannelSpec::task1();
  int aligned = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const DiscretePair pair =
        train_discrete_pair(spec, DiscreteCondition::kZipfEnergy, 0.05, 1.0, 4000, 500 + s);
    const Tensor pi = sender_policy(pair);
    std::size_t a0 = 0;
    for (std::size_t a = 1; a < pi.cols(); ++a)
      if (pi.at(0, a) > pi.at(0, a0)) a0 = a;
    if (spec.energy[a0] == 0.0) ++aligned;
  }
  CHECK(aligned >= 4);
}

TEST_CASE("mini training converges in self-play") {
  for (DiscreteCondition condition :
       {DiscreteCondition::kZipfOnly, DiscreteCondition::kZipfEnergy}) {
    const DiscretePair pair = train_discrete_pair(DiscreteChannelSpec::task1(), condition, 0.05,
                                                  1.0, 2500, 11);
    CHECK(discrete_sp_accuracy(pair) >= 0.95);
  }
}

TEST_SUITE_END();
