#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "emcomm/graph.hpp"

namespace emcomm {

// Per-joint rotation composition order. Intrinsic X-then-Y-then-Z is the
// default; ZYX exists to demonstrate convention invariance of results.
enum class EulerOrder { kXyz, kZyx };

std::string euler_order_name(EulerOrder order);
EulerOrder euler_order_from_name(const std::string& name);

// Kinematic tree. Joint 0 is the root, pinned at the origin with
// rotational freedom only; link offsets are constant (links cannot
// detach). Joints must be listed parent-before-child.
struct BodyTopology {
  int joints = 0;
  std::vector<int> parent;                      // parent[0] == -1
  std::vector<std::array<double, 3>> offsets;   // feet, in the parent frame
  std::vector<double> reference_rotations;      // radians, length 3*joints
  EulerOrder euler = EulerOrder::kXyz;

  int dof() const { return 3 * joints; }
  void validate() const;  // throws std::invalid_argument on malformed trees
};

// Joint state: rotations in [0, 2*pi), positions derived from them by FK.
struct Pose {
  std::vector<double> rotations;
  std::vector<double> positions;
};

// Serial chain with unit-length links along +x and an all-zero reference
// pose.
BodyTopology default_arm(int joints = 4);

Pose reference_pose(const BodyTopology& topo);

double wrap_angle_two_pi(double a);
// Shortest signed angular difference a - b, mapped into [-pi, pi).
double circular_diff(double a, double b);

// World positions of all joints from flat per-joint rotations (length
// 3*J): position(j) = position(parent) + world_rotation(parent) * offset(j).
std::vector<double> fk_positions(std::span<const double> rotations, const BodyTopology& topo);

// Deterministic transition: rotations advance by the action and wrap into
// [0, 2*pi); positions are recomputed by FK.
Pose fk_step(const Pose& pose, std::span<const double> action, const BodyTopology& topo);

// Graph counterpart of fk_positions over a batch: (B, 3J) rotations to
// (B, 3J) positions, differentiable in the rotations.
Var fk_positions_graph(Var rotations, const BodyTopology& topo);

}  // namespace emcomm
