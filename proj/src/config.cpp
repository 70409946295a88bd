#include "emcomm/config.hpp"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "emcomm/agents.hpp"
#include "emcomm/body.hpp"
#include "emcomm/util.hpp"

namespace emcomm {
namespace {

using Member = std::variant<int ExperimentConfig::*, double ExperimentConfig::*,
                            bool ExperimentConfig::*, std::string ExperimentConfig::*,
                            std::uint64_t ExperimentConfig::*>;

struct KeySpec {
  const char* name;
  Member member;
};

const std::vector<KeySpec>& registry() {
  using C = ExperimentConfig;
  static const std::vector<KeySpec> keys = {
      {"domain", &C::domain},
      {"scale", &C::scale},
      {"seed", &C::seed},
      {"out_dir", &C::out_dir},
      {"intents.count", &C::intents},
      {"intents.exponent", &C::zipf_exponent},
      {"intents.uniform", &C::uniform},
      {"body.joints", &C::joints},
      {"body.euler_order", &C::euler_order},
      {"noise.sigma_p", &C::sigma_p},
      {"noise.sigma_r", &C::sigma_r},
      {"noise.sigma_a", &C::sigma_a},
      {"train.lambda", &C::lambda},
      {"train.horizon", &C::horizon},
      {"train.batch", &C::batch},
      {"train.iterations", &C::iterations},
      {"train.hidden", &C::hidden},
      {"train.lr", &C::lr},
      {"train.inertia", &C::inertia},
      {"train.input_mode", &C::input_mode},
      {"train.checkpoint_every", &C::checkpoint_every},
      {"curriculum.enabled", &C::curriculum},
      {"curriculum.iterations", &C::curriculum_iterations},
      {"curriculum.threshold", &C::curriculum_threshold},
      {"population.size", &C::population},
      {"observer.iterations", &C::observer_iterations},
      {"observer.batch", &C::observer_batch},
      {"observer.lr", &C::observer_lr},
      {"observer.split_seed", &C::observer_split_seed},
      {"observer.cells", &C::observer_cells},
      {"eval.crossplay", &C::eval_crossplay},
      {"eval.batch", &C::eval_batch},
      {"eval.gaussian_batch", &C::gaussian_batch},
      {"eval.entropy_samples", &C::entropy_samples},
      {"discrete.task", &C::discrete_task},
      {"discrete.lambda", &C::discrete_lambda},
      {"discrete.lr", &C::discrete_lr},
      {"discrete.iterations", &C::discrete_iterations},
      {"discrete.seeds", &C::discrete_seeds},
  };
  return keys;
}

std::string value_to_string(const ExperimentConfig& cfg, const Member& member) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using T = std::decay_t<decltype(cfg.*ptr)>;
        if constexpr (std::is_same_v<T, int>) return strf("%d", cfg.*ptr);
        if constexpr (std::is_same_v<T, double>) return strf("%.17g", cfg.*ptr);
        if constexpr (std::is_same_v<T, bool>) return (cfg.*ptr) ? "true" : "false";
        if constexpr (std::is_same_v<T, std::uint64_t>)
          return strf("%llu", static_cast<unsigned long long>(cfg.*ptr));
        if constexpr (std::is_same_v<T, std::string>) return cfg.*ptr;
      },
      member);
}

void value_from_string(ExperimentConfig& cfg, const Member& member, const std::string& key,
                       const std::string& text) {
  std::visit(
      [&](auto ptr) {
        using T = std::decay_t<decltype(cfg.*ptr)>;
        if constexpr (std::is_same_v<T, int>) {
          std::size_t pos = 0;
          cfg.*ptr = std::stoi(text, &pos);
          if (pos != text.size()) throw std::invalid_argument("config: bad integer for " + key);
        } else if constexpr (std::is_same_v<T, double>) {
          std::size_t pos = 0;
          cfg.*ptr = std::stod(text, &pos);
          if (pos != text.size()) throw std::invalid_argument("config: bad number for " + key);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (text == "true")
            cfg.*ptr = true;
          else if (text == "false")
            cfg.*ptr = false;
          else
            throw std::invalid_argument("config: bad boolean for " + key + " (true/false)");
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          cfg.*ptr = std::stoull(text);
        } else if constexpr (std::is_same_v<T, std::string>) {
          cfg.*ptr = text;
        }
      },
      member);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (domain != "continuous" && domain != "discrete")
    bad("domain must be continuous or discrete, got '" + domain + "'");
  if (scale != "full" && scale != "desk") bad("scale must be full or desk, got '" + scale + "'");
  if (intents < 1) bad("intents.count must be >= 1");
  if (zipf_exponent < 0.0) bad("intents.exponent must be >= 0");
  if (joints < 1) bad("body.joints must be >= 1");
  euler_order_from_name(euler_order);
  input_mode_from_name(input_mode);
  if (sigma_p < 0 || sigma_r < 0 || sigma_a < 0) bad("noise sigmas must be >= 0");
  if (lambda < 0.0) bad("train.lambda must be >= 0");
  if (horizon < 1) bad("train.horizon must be >= 1");
  if (batch < 1) bad("train.batch must be >= 1");
  if (iterations < 0) bad("train.iterations must be >= 0");
  if (hidden < 1) bad("train.hidden must be >= 1");
  if (lr <= 0.0) bad("train.lr must be > 0");
  if (population < 1) bad("population.size must be >= 1");
  if (observer_iterations < 1) bad("observer.iterations must be >= 1");
  if (discrete_task != 1 && discrete_task != 2) bad("discrete.task must be 1 or 2");
  if (discrete_seeds < 1) bad("discrete.seeds must be >= 1");
  if (observer_cells != "all" && observer_cells != "none") {
    for (const auto& cell : split(observer_cells, ',')) {
      const auto sides = split(cell, ':');
      if (sides.size() != 2 || (sides[0] != "tau" && sides[0] != "phi") ||
          (sides[1] != "tau" && sides[1] != "phi"))
        bad("observer.cells entries must look like tau:phi, got '" + cell + "'");
    }
  }
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return serialize_config(*this) == serialize_config(o);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const auto& key : registry()) out << key.name << " = " << value_to_string(cfg, key.member) << "\n";
  return out.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::vector<std::string> unknown;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value, got '" + trimmed + "'");
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    const KeySpec* spec = nullptr;
    for (const auto& k : registry())
      if (key == k.name) {
        spec = &k;
        break;
      }
    if (!spec) {
      unknown.push_back(key);
      continue;
    }
    value_from_string(cfg, spec->member, key, value);
    seen.insert(key);
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  if (cfg.scale == "desk") {
    if (!seen.count("train.batch")) cfg.batch = 256;
    if (!seen.count("population.size")) cfg.population = 6;
  }
  cfg.validate();
  return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // Artifact placement must not change experiment identity.
  ExperimentConfig keyed = cfg;
  keyed.out_dir.clear();
  return fnv1a64(serialize_config(keyed));
}

ExperimentConfig apply_desk_preset(ExperimentConfig cfg) {
  cfg.scale = "desk";
  cfg.batch = 256;
  cfg.population = 6;
  return cfg;
}

}  // namespace emcomm
