#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emcomm/rng.hpp"
#include "emcomm/tensor.hpp"

namespace emcomm {

class Graph;
class ParamSet;

// Handle into a Graph's node storage.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;
};

// Reverse-mode tape over dense tensors. Nodes are appended in forward
// order and only ever reference earlier nodes, so descending creation
// order is a valid reverse-topological order for backpropagation.
// A graph is confined to one thread; distinct graphs share nothing.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var scalar_const(double value);
  // Leaf bound to a ParamSet entry; backward() accumulates its gradient
  // into the set's gradient slot.
  Var param(ParamSet& params, const std::string& name);
  Var param(ParamSet& params, int index);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of a node; valid after backward() for reachable nodes.
  const Tensor& grad(Var v) const;

  // Seeds d(root)/d(root) = 1 and propagates gradients to every node
  // reachable from `root`. The root must be scalar (1x1).
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }

  // Count of clamped log evaluations since construction (see vlog floor).
  long clamp_events() const { return clamp_events_; }
  void note_clamps(long k) { clamp_events_ += k; }

  // Internal node API used by the operation constructors.
  Var make_node(Tensor value, std::vector<std::uint32_t> inputs,
                std::function<void(Graph&, std::uint32_t)> back);
  Tensor& grad_slot(std::uint32_t id);  // lazily allocated, zero-filled
  const Tensor& node_value(std::uint32_t id) const { return nodes_[id].value; }
  std::span<const std::uint32_t> node_inputs(std::uint32_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched by backward
    std::vector<std::uint32_t> inputs;
    std::function<void(Graph&, std::uint32_t)> back;  // null for leaves
    ParamSet* param_set = nullptr;
    int param_index = -1;
  };
  // deque: node references stay valid while the graph grows
  std::deque<Node> nodes_;
  long clamp_events_ = 0;
};

// Elementwise and structural operations. Shape mismatches throw
// std::invalid_argument naming the offending shapes.
Var add(Var a, Var b);  // same shape, or b a (1,C) row bias, or b scalar
Var sub(Var a, Var b);  // same shape
Var mul(Var a, Var b);  // elementwise, same shape or b scalar
Var scale(Var a, double c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
Var softmax(Var a);  // row-wise
// Natural log. With floor > 0 the input is clamped at the floor (events
// counted on the graph) and the gradient is zero below it.
Var vlog(Var a, double floor = 0.0);
Var vsin(Var a);
Var vcos(Var a);
Var square(Var a);
Var sum(Var a);      // full reduction to 1x1
Var row_sum(Var a);  // (R,C) -> (R,1)
Var mean(Var a);     // sum / size
// Wraps values into [0, 2*pi). Straight-through gradient: the wrap is an
// action equivalence, not a physical discontinuity.
Var wrap_two_pi(Var a);
// Adds N(0, sigma^2) draws from `rng`. Reparameterized: the draws are
// constants in backward, so the gradient passes through unchanged.
Var gaussian_noise(Var a, double sigma, Rng& rng);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

}  // namespace emcomm
