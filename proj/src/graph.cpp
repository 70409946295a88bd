#include "emcomm/graph.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "emcomm/params.hpp"
#include "emcomm/util.hpp"

namespace emcomm {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(strf("%s: incompatible shapes (%zux%zu) vs (%zux%zu)", op, a.rows(),
                                   a.cols(), b.rows(), b.cols()));
}

void check_same_graph(Var a, Var b, const char* op) {
  if (a.graph != b.graph)
    throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
}

// g += d, elementwise.
void acc(Tensor& g, const Tensor& d) {
  double* gp = g.raw();
  const double* dp = d.raw();
  for (std::size_t i = 0; i < g.size(); ++i) gp[i] += dp[i];
}

}  // namespace

Var Graph::make_node(Tensor value, std::vector<std::uint32_t> inputs,
                     std::function<void(Graph&, std::uint32_t)> back) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) { return make_node(std::move(value), {}, nullptr); }

Var Graph::scalar_const(double value) { return constant(Tensor::scalar(value)); }

Var Graph::param(ParamSet& params, const std::string& name) {
  const int idx = params.index_of(name);
  if (idx < 0) throw std::invalid_argument("param: no parameter named '" + name + "'");
  return param(params, idx);
}

Var Graph::param(ParamSet& params, int index) {
  Var v = make_node(params.value(index), {}, nullptr);
  nodes_[v.id].param_set = &params;
  nodes_[v.id].param_index = index;
  return v;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) throw std::logic_error("grad: node has no gradient (run backward first)");
  return n.grad;
}

Tensor& Graph::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var root) {
  if (root.graph != this) throw std::invalid_argument("backward: root from a different graph");
  if (nodes_[root.id].value.size() != 1)
    throw std::invalid_argument(strf("backward: root must be scalar, got (%zux%zu)",
                                     nodes_[root.id].value.rows(), nodes_[root.id].value.cols()));

  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<std::uint32_t> stack{root.id};
  reachable[root.id] = 1;
  while (!stack.empty()) {
    const std::uint32_t u = stack.back();
    stack.pop_back();
    for (std::uint32_t v : nodes_[u].inputs) {
      if (!reachable[v]) {
        reachable[v] = 1;
        stack.push_back(v);
      }
    }
  }

  grad_slot(root.id)[0] += 1.0;
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    if (!reachable[id]) continue;
    Node& n = nodes_[id];
    if (n.grad.empty()) grad_slot(id);
    if (n.back) n.back(*this, id);
    if (n.param_set) {
      acc(n.param_set->grad(n.param_index), n.grad);
      n.param_set->mark_touched();
    }
  }
}

// ---------------------------------------------------------------------------
// operations

Var add(Var a, Var b) {
  check_same_graph(a, b, "add");
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  const Tensor& vb = g.value(b);
  enum class Mode { kSame, kRow, kScalar };
  Mode mode;
  if (va.same_shape(vb))
    mode = Mode::kSame;
  else if (vb.rows() == 1 && vb.cols() == va.cols())
    mode = Mode::kRow;
  else if (vb.size() == 1)
    mode = Mode::kScalar;
  else
    shape_error("add", va, vb);

  Tensor out(va.rows(), va.cols());
  const double* pa = va.raw();
  const double* pb = vb.raw();
  double* po = out.raw();
  if (mode == Mode::kSame) {
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
  } else if (mode == Mode::kRow) {
    for (std::size_t r = 0; r < va.rows(); ++r)
      for (std::size_t c = 0; c < va.cols(); ++c) po[r * va.cols() + c] = pa[r * va.cols() + c] + pb[c];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[0];
  }

  const auto ida = a.id, idb = b.id;
  return g.make_node(std::move(out), {ida, idb}, [ida, idb, mode](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    acc(gg.grad_slot(ida), up);
    Tensor& gb = gg.grad_slot(idb);
    if (mode == Mode::kSame) {
      acc(gb, up);
    } else if (mode == Mode::kRow) {
      for (std::size_t r = 0; r < up.rows(); ++r)
        for (std::size_t c = 0; c < up.cols(); ++c) gb[c] += up.at(r, c);
    } else {
      double s = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) s += up[i];
      gb[0] += s;
    }
  });
}

Var sub(Var a, Var b) {
  check_same_graph(a, b, "sub");
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  const Tensor& vb = g.value(b);
  if (!va.same_shape(vb)) shape_error("sub", va, vb);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  const auto ida = a.id, idb = b.id;
  return g.make_node(std::move(out), {ida, idb}, [ida, idb](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    acc(gg.grad_slot(ida), up);
    Tensor& gb = gg.grad_slot(idb);
    for (std::size_t i = 0; i < up.size(); ++i) gb[i] -= up[i];
  });
}

Var mul(Var a, Var b) {
  check_same_graph(a, b, "mul");
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  const Tensor& vb = g.value(b);
  const bool scalar_b = vb.size() == 1 && va.size() != 1;
  if (!scalar_b && !va.same_shape(vb)) shape_error("mul", va, vb);
  Tensor out(va.rows(), va.cols());
  if (scalar_b) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[0];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  }
  const auto ida = a.id, idb = b.id;
  return g.make_node(std::move(out), {ida, idb}, [ida, idb, scalar_b](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& va2 = gg.node_value(ida);
    const Tensor& vb2 = gg.node_value(idb);
    Tensor& ga = gg.grad_slot(ida);
    Tensor& gb = gg.grad_slot(idb);
    if (scalar_b) {
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * vb2[0];
      double s = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) s += up[i] * va2[i];
      gb[0] += s;
    } else {
      for (std::size_t i = 0; i < up.size(); ++i) {
        ga[i] += up[i] * vb2[i];
        gb[i] += up[i] * va2[i];
      }
    }
  });
}

Var scale(Var a, double c) {
  if (c == 1.0) return a;
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * c;
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida, c](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * c;
  });
}

Var matmul(Var a, Var b) {
  check_same_graph(a, b, "matmul");
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  const Tensor& vb = g.value(b);
  if (va.cols() != vb.rows()) shape_error("matmul", va, vb);
  const std::size_t n = va.rows(), k = va.cols(), m = vb.cols();
  Tensor out(n, m);
  {
    const double* A = va.raw();
    const double* B = vb.raw();
    double* C = out.raw();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = A[i * k + kk];
        const double* Brow = B + kk * m;
        double* Crow = C + i * m;
        for (std::size_t j = 0; j < m; ++j) Crow[j] += av * Brow[j];
      }
  }
  const auto ida = a.id, idb = b.id;
  return g.make_node(std::move(out), {ida, idb}, [ida, idb, n, k, m](Graph& gg, std::uint32_t self) {
    const double* up = gg.grad_slot(self).raw();
    const double* A = gg.node_value(ida).raw();
    const double* B = gg.node_value(idb).raw();
    double* gA = gg.grad_slot(ida).raw();
    double* gB = gg.grad_slot(idb).raw();
    // dA = dC * B^T
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* uprow = up + i * m;
        const double* Brow = B + kk * m;
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += uprow[j] * Brow[j];
        gA[i * k + kk] += s;
      }
    // dB = A^T * dC
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = A[i * k + kk];
        const double* uprow = up + i * m;
        double* gBrow = gB + kk * m;
        for (std::size_t j = 0; j < m; ++j) gBrow[j] += av * uprow[j];
      }
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.cols(), va.rows());
  for (std::size_t r = 0; r < va.rows(); ++r)
    for (std::size_t c = 0; c < va.cols(); ++c) out.at(c, r) = va.at(r, c);
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t r = 0; r < up.rows(); ++r)
      for (std::size_t c = 0; c < up.cols(); ++c) ga.at(c, r) += up.at(r, c);
  });
}

Var relu(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > 0.0 ? va[i] : 0.0;
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& v = gg.node_value(ida);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < up.size(); ++i)
      if (v[i] > 0.0) ga[i] += up[i];
  });
}

Var softmax(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  const std::size_t C = va.cols();
  for (std::size_t r = 0; r < va.rows(); ++r) {
    double mx = va.at(r, 0);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, va.at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double e = std::exp(va.at(r, c) - mx);
      out.at(r, c) = e;
      denom += e;
    }
    for (std::size_t c = 0; c < C; ++c) out.at(r, c) /= denom;
  }
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida, C](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& p = gg.node_value(self);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t r = 0; r < up.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += up.at(r, c) * p.at(r, c);
      for (std::size_t c = 0; c < C; ++c) ga.at(r, c) += p.at(r, c) * (up.at(r, c) - dot);
    }
  });
}

Var vlog(Var a, double floor) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  long clamps = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = va[i];
    if (floor > 0.0 && x < floor) {
      x = floor;
      ++clamps;
    }
    out[i] = std::log(x);
  }
  if (clamps > 0) g.note_clamps(clamps);
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida, floor](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& v = gg.node_value(ida);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (floor > 0.0 && v[i] < floor) continue;  // clamped: no gradient
      ga[i] += up[i] / v[i];
    }
  });
}

Var vsin(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(va[i]);
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& v = gg.node_value(ida);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * std::cos(v[i]);
  });
}

Var vcos(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cos(va[i]);
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& v = gg.node_value(ida);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] -= up[i] * std::sin(v[i]);
  });
}

Var square(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * va[i];
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    const Tensor& v = gg.node_value(ida);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += 2.0 * up[i] * v[i];
  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
  const auto ida = a.id;
  return g.make_node(Tensor::scalar(s), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const double up = gg.grad_slot(self)[0];
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += up;
  });
}

Var row_sum(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), 1);
  for (std::size_t r = 0; r < va.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < va.cols(); ++c) s += va.at(r, c);
    out[r] = s;
  }
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += up[r];
  });
}

Var mean(Var a) {
  const std::size_t n = a.graph->value(a).size();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var wrap_two_pi(Var a) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double w = va[i] - kTwoPi * std::floor(va[i] / kTwoPi);
    if (w >= kTwoPi) w = 0.0;  // guard against rounding at the boundary
    out[i] = w;
  }
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    acc(gg.grad_slot(ida), gg.grad_slot(self));
  });
}

Var gaussian_noise(Var a, double sigma, Rng& rng) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  Tensor out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + sigma * rng.gaussian();
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida](Graph& gg, std::uint32_t self) {
    acc(gg.grad_slot(ida), gg.grad_slot(self));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Graph& g = *parts[0].graph;
  const std::size_t rows = g.value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    check_same_graph(parts[0], p, "concat_cols");
    const Tensor& v = g.value(p);
    if (v.rows() != rows)
      throw std::invalid_argument(strf("concat_cols: row mismatch %zu vs %zu", rows, v.rows()));
    cols += v.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& v = g.value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out.at(r, off + c) = v.at(r, c);
    ids.push_back(p.id);
    offsets.push_back(off);
    off += v.cols();
  }
  return g.make_node(std::move(out), ids, [ids, offsets](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor& ga = gg.grad_slot(ids[k]);
      for (std::size_t r = 0; r < ga.rows(); ++r)
        for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += up.at(r, offsets[k] + c);
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Graph& g = *a.graph;
  const Tensor& va = g.value(a);
  if (begin >= end || end > va.cols())
    throw std::invalid_argument(
        strf("slice_cols: range [%zu,%zu) out of %zu columns", begin, end, va.cols()));
  Tensor out(va.rows(), end - begin);
  for (std::size_t r = 0; r < va.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out.at(r, c - begin) = va.at(r, c);
  const auto ida = a.id;
  return g.make_node(std::move(out), {ida}, [ida, begin](Graph& gg, std::uint32_t self) {
    const Tensor& up = gg.grad_slot(self);
    Tensor& ga = gg.grad_slot(ida);
    for (std::size_t r = 0; r < up.rows(); ++r)
      for (std::size_t c = 0; c < up.cols(); ++c) ga.at(r, begin + c) += up.at(r, c);
  });
}

}  // namespace emcomm
