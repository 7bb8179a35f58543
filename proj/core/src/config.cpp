#include "hrm/config.hpp"

#include <cmath>
#include <set>

#include "hrm/errors.hpp"

namespace hrm {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::kHrm: return "hrm";
    case Arch::kFeedforward: return "feedforward";
    case Arch::kRecurrent: return "recurrent";
  }
  return "hrm";
}

Arch arch_from_string(const std::string& name) {
  if (name == "hrm") return Arch::kHrm;
  if (name == "feedforward") return Arch::kFeedforward;
  if (name == "recurrent") return Arch::kRecurrent;
  throw ConfigError("unknown arch '" + name + "'");
}

int ModelConfig::inner_dim() const {
  return static_cast<int>(std::lround(expansion * hidden_dim));
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid config: ") + what);
  };
  require(vocab_size > 0, "vocab_size must be positive");
  require(seq_len > 0, "seq_len must be positive");
  require(hidden_dim > 0 && n_heads > 0, "hidden_dim and n_heads must be positive");
  require(hidden_dim % (2 * n_heads) == 0, "hidden_dim must be divisible by 2*n_heads");
  require(blocks_per_module > 0, "blocks_per_module must be positive");
  require(expansion > 0 && inner_dim() > 0, "expansion must give a positive inner width");
  require(cycles >= 1 && low_steps >= 1, "cycles and low_steps must be >= 1");
  require(max_segments >= 1, "max_segments must be >= 1");
  require(explore_prob >= 0.0 && explore_prob <= 1.0, "explore_prob must lie in [0,1]");
  require(rms_eps > 0, "rms_eps must be positive");
  require(rope_base > 1, "rope_base must exceed 1");
  require(baseline_depth >= 1 && baseline_loops >= 1, "baseline depth/loops must be >= 1");
  require(lr >= 0 && warmup_steps >= 0, "lr and warmup_steps must be non-negative");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "betas must lie in [0,1)");
  require(weight_decay >= 0, "weight_decay must be non-negative");
  require(batch_size >= 1, "batch_size must be >= 1");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["arch"] = to_string(c.arch);
  j["vocab_size"] = c.vocab_size;
  j["seq_len"] = c.seq_len;
  j["hidden_dim"] = c.hidden_dim;
  j["n_heads"] = c.n_heads;
  j["blocks_per_module"] = c.blocks_per_module;
  j["expansion"] = c.expansion;
  j["cycles"] = c.cycles;
  j["low_steps"] = c.low_steps;
  j["max_segments"] = c.max_segments;
  j["act"] = c.act;
  j["explore_prob"] = c.explore_prob;
  j["use_stablemax"] = c.use_stablemax;
  j["rms_eps"] = c.rms_eps;
  j["rope_base"] = c.rope_base;
  j["baseline_depth"] = c.baseline_depth;
  j["baseline_loops"] = c.baseline_loops;
  j["lr"] = c.lr;
  j["warmup_steps"] = c.warmup_steps;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j, const ModelConfig& base) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c = base;
  static const std::set<std::string> kKeys = {
      "arch", "vocab_size", "seq_len", "hidden_dim", "n_heads", "blocks_per_module",
      "expansion", "cycles", "low_steps", "max_segments", "act", "explore_prob", "use_stablemax",
      "rms_eps", "rope_base", "baseline_depth", "baseline_loops", "lr", "warmup_steps",
      "beta1", "beta2", "weight_decay", "batch_size", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  try {
    if (j.contains("arch")) c.arch = arch_from_string(j.at("arch").get<std::string>());
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("vocab_size", c.vocab_size);
    get("seq_len", c.seq_len);
    get("hidden_dim", c.hidden_dim);
    get("n_heads", c.n_heads);
    get("blocks_per_module", c.blocks_per_module);
    get("expansion", c.expansion);
    get("cycles", c.cycles);
    get("low_steps", c.low_steps);
    get("max_segments", c.max_segments);
    get("act", c.act);
    get("explore_prob", c.explore_prob);
    get("use_stablemax", c.use_stablemax);
    get("rms_eps", c.rms_eps);
    get("rope_base", c.rope_base);
    get("baseline_depth", c.baseline_depth);
    get("baseline_loops", c.baseline_loops);
    get("lr", c.lr);
    get("warmup_steps", c.warmup_steps);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("weight_decay", c.weight_decay);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config type error: ") + e.what());
  }
  return c;
}

}  // namespace hrm
