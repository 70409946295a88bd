#include "emcomm/body.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "emcomm/util.hpp"

namespace emcomm {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// The rotation/accumulation formulas are shared between the plain-double
// and graph paths through a small algebra type, so the two paths cannot
// drift apart.
struct DoubleAlg {
  using T = double;
  static T mul(T a, T b) { return a * b; }
  static T add(T a, T b) { return a + b; }
  static T sub(T a, T b) { return a - b; }
  static T neg(T a) { return -a; }
  static T scalec(T a, double c) { return a * c; }
  static T sin(T a) { return std::sin(a); }
  static T cos(T a) { return std::cos(a); }
};

struct VarAlg {
  using T = Var;
  static T mul(T a, T b) { return emcomm::mul(a, b); }
  static T add(T a, T b) { return emcomm::add(a, b); }
  static T sub(T a, T b) { return emcomm::sub(a, b); }
  static T neg(T a) { return emcomm::scale(a, -1.0); }
  static T scalec(T a, double c) { return emcomm::scale(a, c); }
  static T sin(T a) { return vsin(a); }
  static T cos(T a) { return vcos(a); }
};

// Intrinsic composition: XYZ builds Rx*Ry*Rz, ZYX builds Rz*Ry*Rx, with
// (sa,ca) for the x angle, (sb,cb) for y, (sc,cc) for z.
template <class A, class T = typename A::T>
std::array<T, 9> joint_rotation(const T& sa, const T& ca, const T& sb, const T& cb, const T& sc,
                                const T& cc, EulerOrder order) {
  std::array<T, 9> r{};
  if (order == EulerOrder::kXyz) {
    const T sasb = A::mul(sa, sb);
    const T casb = A::mul(ca, sb);
    r[0] = A::mul(cb, cc);
    r[1] = A::neg(A::mul(cb, sc));
    r[2] = sb;
    r[3] = A::add(A::mul(ca, sc), A::mul(sasb, cc));
    r[4] = A::sub(A::mul(ca, cc), A::mul(sasb, sc));
    r[5] = A::neg(A::mul(sa, cb));
    r[6] = A::sub(A::mul(sa, sc), A::mul(casb, cc));
    r[7] = A::add(A::mul(sa, cc), A::mul(casb, sc));
    r[8] = A::mul(ca, cb);
  } else {
    const T ccsb = A::mul(cc, sb);
    const T scsb = A::mul(sc, sb);
    r[0] = A::mul(cc, cb);
    r[1] = A::sub(A::mul(ccsb, sa), A::mul(sc, ca));
    r[2] = A::add(A::mul(ccsb, ca), A::mul(sc, sa));
    r[3] = A::mul(sc, cb);
    r[4] = A::add(A::mul(scsb, sa), A::mul(cc, ca));
    r[5] = A::sub(A::mul(scsb, ca), A::mul(cc, sa));
    r[6] = A::neg(sb);
    r[7] = A::mul(cb, sa);
    r[8] = A::mul(cb, ca);
  }
  return r;
}

template <class A, class T = typename A::T>
std::array<T, 9> mat3_mul(const std::array<T, 9>& a, const std::array<T, 9>& b) {
  std::array<T, 9> c{};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      c[i * 3 + k] = A::add(A::add(A::mul(a[i * 3 + 0], b[0 + k]), A::mul(a[i * 3 + 1], b[3 + k])),
                            A::mul(a[i * 3 + 2], b[6 + k]));
  return c;
}

// World positions from per-DOF rotation components (length 3J).
template <class A, class T = typename A::T>
std::vector<T> fk_core(const std::vector<T>& rot, const BodyTopology& topo, const T& zero) {
  std::vector<std::array<T, 9>> world(topo.joints);
  std::vector<std::array<T, 3>> pos(topo.joints);
  for (int j = 0; j < topo.joints; ++j) {
    const T sa = A::sin(rot[3 * j + 0]), ca = A::cos(rot[3 * j + 0]);
    const T sb = A::sin(rot[3 * j + 1]), cb = A::cos(rot[3 * j + 1]);
    const T sc = A::sin(rot[3 * j + 2]), cc = A::cos(rot[3 * j + 2]);
    const auto local = joint_rotation<A>(sa, ca, sb, cb, sc, cc, topo.euler);
    if (j == 0) {
      world[j] = local;
      pos[j] = {zero, zero, zero};
      continue;
    }
    const int par = topo.parent[j];
    world[j] = mat3_mul<A>(world[par], local);
    for (int i = 0; i < 3; ++i) {
      T acc = pos[par][i];
      for (int m = 0; m < 3; ++m) {
        const double off = topo.offsets[j][m];
        if (off == 0.0) continue;
        acc = A::add(acc, A::scalec(world[par][i * 3 + m], off));
      }
      pos[j][i] = acc;
    }
  }
  std::vector<T> flat;
  flat.reserve(3 * topo.joints);
  for (int j = 0; j < topo.joints; ++j)
    for (int i = 0; i < 3; ++i) flat.push_back(pos[j][i]);
  return flat;
}

}  // namespace

std::string euler_order_name(EulerOrder order) {
  return order == EulerOrder::kXyz ? "xyz" : "zyx";
}

EulerOrder euler_order_from_name(const std::string& name) {
  if (name == "xyz") return EulerOrder::kXyz;
  if (name == "zyx") return EulerOrder::kZyx;
  throw std::invalid_argument("unknown euler order '" + name + "' (expected xyz or zyx)");
}

void BodyTopology::validate() const {
  if (joints < 1) throw std::invalid_argument("topology: need at least one joint");
  if (parent.size() != static_cast<std::size_t>(joints) ||
      offsets.size() != static_cast<std::size_t>(joints) ||
      reference_rotations.size() != static_cast<std::size_t>(dof()))
    throw std::invalid_argument(strf(
        "topology: inconsistent sizes (joints=%d, parents=%zu, offsets=%zu, reference=%zu)",
        joints, parent.size(), offsets.size(), reference_rotations.size()));
  if (parent[0] != -1 && parent[0] != 0)
    throw std::invalid_argument("topology: joint 0 must be the root");
  for (int j = 1; j < joints; ++j)
    if (parent[j] < 0 || parent[j] >= j)
      throw std::invalid_argument(
          strf("topology: parent of joint %d must precede it, got %d", j, parent[j]));
}

BodyTopology default_arm(int joints) {
  if (joints < 1) throw std::invalid_argument("default_arm: need at least one joint");
  BodyTopology topo;
  topo.joints = joints;
  topo.parent.resize(joints);
  topo.offsets.resize(joints);
  topo.parent[0] = -1;
  topo.offsets[0] = {0.0, 0.0, 0.0};
  for (int j = 1; j < joints; ++j) {
    topo.parent[j] = j - 1;
    topo.offsets[j] = {1.0, 0.0, 0.0};  // unit links, measured in feet
  }
  topo.reference_rotations.assign(topo.dof(), 0.0);
  return topo;
}

Pose reference_pose(const BodyTopology& topo) {
  topo.validate();
  Pose pose;
  pose.rotations.resize(topo.dof());
  for (int i = 0; i < topo.dof(); ++i)
    pose.rotations[i] = wrap_angle_two_pi(topo.reference_rotations[i]);
  pose.positions = fk_positions(pose.rotations, topo);
  return pose;
}

double wrap_angle_two_pi(double a) {
  double w = a - kTwoPi * std::floor(a / kTwoPi);
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double circular_diff(double a, double b) {
  const double d = a - b;
  return d - kTwoPi * std::floor((d + std::numbers::pi) / kTwoPi);
}

std::vector<double> fk_positions(std::span<const double> rotations, const BodyTopology& topo) {
  topo.validate();
  if (rotations.size() != static_cast<std::size_t>(topo.dof()))
    throw std::invalid_argument(
        strf("fk_positions: expected %d rotations, got %zu", topo.dof(), rotations.size()));
  std::vector<double> rot(rotations.begin(), rotations.end());
  return fk_core<DoubleAlg>(rot, topo, 0.0);
}

Pose fk_step(const Pose& pose, std::span<const double> action, const BodyTopology& topo) {
  if (action.size() != pose.rotations.size() ||
      action.size() != static_cast<std::size_t>(topo.dof()))
    throw std::invalid_argument(strf("fk_step: action size %zu does not match %d DOFs",
                                     action.size(), topo.dof()));
  Pose next;
  next.rotations.resize(action.size());
  for (std::size_t i = 0; i < action.size(); ++i)
    next.rotations[i] = wrap_angle_two_pi(pose.rotations[i] + action[i]);
  next.positions = fk_positions(next.rotations, topo);
  return next;
}

Var fk_positions_graph(Var rotations, const BodyTopology& topo) {
  topo.validate();
  Graph& g = *rotations.graph;
  const std::size_t batch = g.value(rotations).rows();
  const std::size_t cols = g.value(rotations).cols();
  if (cols != static_cast<std::size_t>(topo.dof()))
    throw std::invalid_argument(strf("fk_positions_graph: expected %d rotation columns, got %zu",
                                     topo.dof(), cols));
  std::vector<Var> comps;
  comps.reserve(topo.dof());
  for (int i = 0; i < topo.dof(); ++i)
    comps.push_back(slice_cols(rotations, i, i + 1));
  const Var zero = g.constant(Tensor(batch, 1, 0.0));
  const std::vector<Var> flat = fk_core<VarAlg>(comps, topo, zero);
  return concat_cols(flat);
}

}  // namespace emcomm
