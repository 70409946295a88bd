#include "emcomm/agents.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "emcomm/util.hpp"

namespace emcomm {
namespace {

Tensor he_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor w(fan_in, fan_out);
  for (double& x : w.data()) x = rng.uniform(-limit, limit);
  return w;
}

ParamSet make_mlp_params(int in, int hidden, int out, Rng& rng) {
  ParamSet ps;
  ps.add("W1", he_uniform(in, hidden, rng));
  ps.add("b1", Tensor(1, hidden));
  ps.add("W2", he_uniform(hidden, hidden, rng));
  ps.add("b2", Tensor(1, hidden));
  ps.add("W3", he_uniform(hidden, out, rng));
  ps.add("b3", Tensor(1, out));
  return ps;
}

Var mlp3_forward(Graph& g, ParamSet& ps, Var x) {
  const Var h1 = relu(add(matmul(x, g.param(ps, "W1")), g.param(ps, "b1")));
  const Var h2 = relu(add(matmul(h1, g.param(ps, "W2")), g.param(ps, "b2")));
  return add(matmul(h2, g.param(ps, "W3")), g.param(ps, "b3"));
}

}  // namespace

std::string input_mode_name(InputMode mode) {
  return mode == InputMode::kTrajectory ? "trajectory" : "latent";
}

InputMode input_mode_from_name(const std::string& name) {
  if (name == "trajectory") return InputMode::kTrajectory;
  if (name == "latent") return InputMode::kLatent;
  throw std::invalid_argument("unknown input mode '" + name + "' (expected trajectory or latent)");
}

int trajectory_feed_dim(int joints, int horizon) { return horizon * 9 * joints; }

PolicyNet make_policy(int joints, int intents, int hidden, Rng& rng) {
  PolicyNet net;
  net.joints = joints;
  net.intents = intents;
  net.hidden = hidden;
  net.params = make_mlp_params(net.input_dim(), hidden, net.output_dim(), rng);
  return net;
}

DiscriminatorNet make_discriminator(InputMode mode, int input_dim, int intents, int hidden,
                                    Rng& rng) {
  DiscriminatorNet net;
  net.mode = mode;
  net.input_dim = input_dim;
  net.intents = intents;
  net.hidden = hidden;
  net.params = make_mlp_params(input_dim, hidden, intents, rng);
  return net;
}

Var policy_forward(Graph& g, PolicyNet& net, Var input) {
  const Tensor& v = g.value(input);
  if (v.cols() != static_cast<std::size_t>(net.input_dim()))
    throw std::invalid_argument(strf("policy_forward: expected %d input columns, got %zu",
                                     net.input_dim(), v.cols()));
  return mlp3_forward(g, net.params, input);
}

Var discriminator_forward(Graph& g, DiscriminatorNet& net, Var input) {
  const std::size_t cols = g.value(input).cols();
  if (cols != static_cast<std::size_t>(net.input_dim))
    throw std::invalid_argument(strf("discriminator_forward: expected %d input columns, got %zu",
                                     net.input_dim, cols));
  Var x = input;
  if (net.mode == InputMode::kLatent) {
    // Energies span orders of magnitude; compress the raw scalar so the
    // first layer starts in a sane operating range. Monotone, so no
    // information is lost.
    x = vlog(add(x, g.constant(Tensor(g.value(input).rows(), 1, 1.0))));
  }
  return softmax(mlp3_forward(g, net.params, x));
}

std::vector<double> policy_act(PolicyNet& net, const Pose& pose,
                               std::span<const double> intent_onehot) {
  if (intent_onehot.size() != static_cast<std::size_t>(net.intents))
    throw std::invalid_argument(strf("policy_act: intent embedding length %zu, expected %d",
                                     intent_onehot.size(), net.intents));
  if (pose.rotations.size() != static_cast<std::size_t>(3 * net.joints))
    throw std::invalid_argument("policy_act: pose does not match the policy's joint count");
  Graph g;
  Tensor in(1, net.input_dim());
  std::size_t k = 0;
  for (double r : pose.rotations) in[k++] = r;
  for (double p : pose.positions) in[k++] = p;
  for (double b : intent_onehot) in[k++] = b;
  const Var out = policy_forward(g, net, g.constant(std::move(in)));
  const Tensor& v = g.value(out);
  return std::vector<double>(v.data().begin(), v.data().end());
}

std::vector<double> discriminate(DiscriminatorNet& net, std::span<const double> message) {
  if (message.size() != static_cast<std::size_t>(net.input_dim))
    throw std::invalid_argument(
        strf("discriminate: message length %zu does not match the net's %s input (dim %d)",
             message.size(), input_mode_name(net.mode).c_str(), net.input_dim));
  Graph g;
  Tensor in(1, net.input_dim);
  for (std::size_t i = 0; i < message.size(); ++i) in[i] = message[i];
  const Var probs = discriminator_forward(g, net, g.constant(std::move(in)));
  const Tensor& v = g.value(probs);
  return std::vector<double>(v.data().begin(), v.data().end());
}

AgentPair make_agent_pair(int id, std::uint64_t seed, const std::string& condition, int joints,
                          int intents, int hidden, InputMode mode, int horizon) {
  AgentPair agent;
  agent.id = id;
  agent.seed = seed;
  agent.condition = condition;
  Rng rng(seed);
  Rng policy_rng = rng.split(1);
  Rng disc_rng = rng.split(2);
  agent.policy = make_policy(joints, intents, hidden, policy_rng);
  const int disc_dim = mode == InputMode::kTrajectory ? trajectory_feed_dim(joints, horizon) : 1;
  agent.discriminator = make_discriminator(mode, disc_dim, intents, hidden, disc_rng);
  return agent;
}

void save_agent(const AgentPair& agent, const std::string& path, const std::string& header) {
  std::ostringstream out;
  if (!header.empty()) out << header;
  out << "emcomm-agent 1\n";
  out << "id " << agent.id << "\n";
  out << "seed " << agent.seed << "\n";
  out << "condition " << (agent.condition.empty() ? "-" : agent.condition) << "\n";
  out << "joints " << agent.policy.joints << "\n";
  out << "intents " << agent.policy.intents << "\n";
  out << "hidden " << agent.policy.hidden << "\n";
  out << "input_mode " << input_mode_name(agent.discriminator.mode) << "\n";
  out << "input_dim " << agent.discriminator.input_dim << "\n";
  out << "policy-params\n";
  agent.policy.params.save(out);
  out << "discriminator-params\n";
  agent.discriminator.params.save(out);
  write_text_file(path, out.str());
}

AgentPair load_agent(const std::string& path) {
  std::istringstream in(read_text_file(path));
  while (in.peek() == '#') {
    std::string comment;
    std::getline(in, comment);
  }
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "emcomm-agent" || version != 1)
    throw std::runtime_error("load_agent: bad header in " + path);
  AgentPair agent;
  std::string condition, mode_name;
  auto expect = [&](const char* key) {
    if (!(in >> word) || word != key)
      throw std::runtime_error(strf("load_agent: expected '%s' in %s", key, path.c_str()));
  };
  expect("id");
  in >> agent.id;
  expect("seed");
  in >> agent.seed;
  expect("condition");
  in >> condition;
  agent.condition = condition == "-" ? "" : condition;
  int joints = 0, intents = 0, hidden = 0, input_dim = 0;
  expect("joints");
  in >> joints;
  expect("intents");
  in >> intents;
  expect("hidden");
  in >> hidden;
  expect("input_mode");
  in >> mode_name;
  expect("input_dim");
  in >> input_dim;
  expect("policy-params");
  agent.policy.joints = joints;
  agent.policy.intents = intents;
  agent.policy.hidden = hidden;
  agent.policy.params = ParamSet::load(in);
  expect("discriminator-params");
  agent.discriminator.mode = input_mode_from_name(mode_name);
  agent.discriminator.input_dim = input_dim;
  agent.discriminator.intents = intents;
  agent.discriminator.hidden = hidden;
  agent.discriminator.params = ParamSet::load(in);
  return agent;
}

}  // namespace emcomm
