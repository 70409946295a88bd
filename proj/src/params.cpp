#include "emcomm/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "emcomm/util.hpp"

namespace emcomm {
namespace {

void write_hex_row(std::ostream& out, const double* p, std::size_t n) {
  char buf[48];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%a", p[i]);
    out << buf << (i + 1 == n ? '\n' : ' ');
  }
}

void read_hex_row(std::istream& in, double* p, std::size_t n) {
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> tok)) throw std::runtime_error("paramset: truncated value row");
    char* end = nullptr;
    p[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw std::runtime_error("paramset: bad float token '" + tok + "'");
  }
}

}  // namespace

int ParamSet::add(const std::string& name, Tensor init) {
  if (index_of(name) >= 0) throw std::invalid_argument("paramset: duplicate name '" + name + "'");
  Entry e;
  e.name = name;
  e.grad = Tensor(init.rows(), init.cols());
  e.m = Tensor(init.rows(), init.cols());
  e.v = Tensor(init.rows(), init.cols());
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

int ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return static_cast<int>(i);
  return -1;
}

Tensor& ParamSet::value(const std::string& name) {
  const int i = index_of(name);
  if (i < 0) throw std::invalid_argument("paramset: no parameter named '" + name + "'");
  return entries_[i].value;
}

const Tensor& ParamSet::value(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw std::invalid_argument("paramset: no parameter named '" + name + "'");
  return entries_[i].value;
}

void ParamSet::zero_grads() {
  for (auto& e : entries_)
    for (double& g : e.grad.data()) g = 0.0;
  touched_ = false;
}

void ParamSet::adam_step(const AdamConfig& cfg) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps_));
  for (auto& e : entries_) {
    if (!e.grad.same_shape(e.value))
      throw std::logic_error("paramset: gradient slot shape mismatch for '" + e.name + "'");
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      e.grad[i] = 0.0;
    }
  }
  touched_ = false;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& e : entries_) {
    h ^= fnv1a64(e.name);
    h *= 0x100000001b3ull;
    h ^= fnv1a64(e.value.raw(), e.value.size() * sizeof(double));
    h *= 0x100000001b3ull;
  }
  return h;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamSet::save(std::ostream& out) const {
  out << "paramset 1\n";
  out << "steps " << steps_ << "\n";
  out << "entries " << entries_.size() << "\n";
  for (const auto& e : entries_) {
    out << "entry " << e.name << " " << e.value.rows() << " " << e.value.cols() << "\n";
    for (const Tensor* t : {&e.value, &e.m, &e.v})
      for (std::size_t r = 0; r < t->rows(); ++r) write_hex_row(out, t->raw() + r * t->cols(), t->cols());
  }
}

ParamSet ParamSet::load(std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "paramset" || version != 1)
    throw std::runtime_error("paramset: bad header");
  ParamSet ps;
  std::size_t entries = 0;
  if (!(in >> word >> ps.steps_) || word != "steps") throw std::runtime_error("paramset: bad steps line");
  if (!(in >> word >> entries) || word != "entries")
    throw std::runtime_error("paramset: bad entries line");
  for (std::size_t k = 0; k < entries; ++k) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> word >> name >> rows >> cols) || word != "entry")
      throw std::runtime_error("paramset: bad entry header");
    const int idx = ps.add(name, Tensor(rows, cols));
    for (Tensor* t : {&ps.entries_[idx].value, &ps.entries_[idx].m, &ps.entries_[idx].v})
      for (std::size_t r = 0; r < rows; ++r) read_hex_row(in, t->raw() + r * cols, cols);
  }
  return ps;
}

}  // namespace emcomm
