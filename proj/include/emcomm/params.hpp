#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emcomm/tensor.hpp"

namespace emcomm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameter arrays with per-array gradient slots and Adam moment
// accumulators. Serialization round-trips 64-bit floats bit-exactly.
class ParamSet {
 public:
  int add(const std::string& name, Tensor init);
  int index_of(const std::string& name) const;  // -1 if absent
  std::size_t count() const { return entries_.size(); }
  const std::string& name(int i) const { return entries_[i].name; }

  Tensor& value(int i) { return entries_[i].value; }
  const Tensor& value(int i) const { return entries_[i].value; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(int i) { return entries_[i].grad; }
  const Tensor& grad(int i) const { return entries_[i].grad; }
  const Tensor& moment1(int i) const { return entries_[i].m; }
  const Tensor& moment2(int i) const { return entries_[i].v; }

  void zero_grads();
  // Adaptive-moment update with bias correction; clears gradients.
  void adam_step(const AdamConfig& cfg);
  std::int64_t steps() const { return steps_; }

  void mark_touched() { touched_ = true; }
  bool grads_touched() const { return touched_; }

  std::uint64_t checksum() const;  // over parameter values only

  void save(std::ostream& out) const;
  static ParamSet load(std::istream& in);

  std::size_t total_size() const;

 private:
  struct Entry {
    std::string name;
    Tensor value, grad, m, v;
  };
  std::vector<Entry> entries_;
  std::int64_t steps_ = 0;
  bool touched_ = false;
};

}  // namespace emcomm
