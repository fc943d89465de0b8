#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cps/jump_law.hpp"
#include "cps/system.hpp"

namespace cps {

/// A fully validated experiment description: which dynamics, which noise,
/// which experiment, where the outputs go. Unknown keys anywhere in the
/// document are rejected; errors carry the offending field path.
struct RunConfig {
  SystemParams system;
  JumpLaw law;
  SimConfig sim;
  std::string experiment;
  nlohmann::json options = nlohmann::json::object();
  std::string out_dir = ".";
  std::string out_prefix = "run";
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : std::runtime_error(path + ": " + msg) {}
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path,
                           const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

inline const json& require(const json& obj, const std::string& path,
                           const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key, "missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline std::vector<double> number_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline SystemParams parse_system(const json& s) {
  reject_unknown(s, "system",
                 {"n", "deltas", "sigmas", "barrier", "tie_order",
                  "allow_zero_sigma"});
  SystemParams p;
  const json& n = require(s, "system", "n");
  if (!n.is_number_integer() || n.get<int>() < 1)
    throw ConfigError("system.n", "expected a positive integer");
  p.n = n.get<int>();
  p.deltas = number_array(require(s, "system", "deltas"), "system.deltas");
  p.sigmas = number_array(require(s, "system", "sigmas"), "system.sigmas");
  if (s.contains("barrier")) p.barrier = number(s["barrier"], "system.barrier");
  if (s.contains("tie_order")) {
    if (!s["tie_order"].is_array())
      throw ConfigError("system.tie_order", "expected an array of indices");
    for (const auto& v : s["tie_order"]) p.tie_order.push_back(v.get<int>());
  }
  if (s.contains("allow_zero_sigma")) {
    if (!s["allow_zero_sigma"].is_boolean())
      throw ConfigError("system.allow_zero_sigma", "expected a boolean");
    p.allow_zero_sigma = s["allow_zero_sigma"].get<bool>();
  }
  return p;
}

inline JumpLaw parse_law(const json& l) {
  reject_unknown(l, "law", {"kind", "rate", "params"});
  JumpLaw law;
  law.kind = jump_kind_from_string(
      require(l, "law", "kind").get<std::string>());
  law.rate = number(require(l, "law", "rate"), "law.rate");
  const json& pr = require(l, "law", "params");
  switch (law.kind) {
    case JumpKind::two_point:
      reject_unknown(pr, "law.params", {"up", "down", "p_up"});
      law.params = {number(require(pr, "law.params", "up"), "law.params.up"),
                    number(require(pr, "law.params", "down"), "law.params.down"),
                    number(require(pr, "law.params", "p_up"), "law.params.p_up")};
      break;
    case JumpKind::uniform_symmetric:
      reject_unknown(pr, "law.params", {"a"});
      law.params = {number(require(pr, "law.params", "a"), "law.params.a")};
      break;
    case JumpKind::laplace:
      reject_unknown(pr, "law.params", {"scale"});
      law.params = {
          number(require(pr, "law.params", "scale"), "law.params.scale")};
      break;
    case JumpKind::discrete_table: {
      reject_unknown(pr, "law.params", {"values", "weights"});
      const std::vector<double> values =
          number_array(require(pr, "law.params", "values"), "law.params.values");
      const std::vector<double> weights = number_array(
          require(pr, "law.params", "weights"), "law.params.weights");
      if (values.size() != weights.size() || values.empty())
        throw ConfigError("law.params", "values and weights must match and be nonempty");
      for (std::size_t i = 0; i < values.size(); ++i) {
        law.params.push_back(values[i]);
        law.params.push_back(weights[i]);
      }
      break;
    }
  }
  const LawValidation lv = validate_law(law);
  if (!lv.valid) throw ConfigError("law", lv.issues.front());
  return law;
}

inline SimConfig parse_sim(const json& s) {
  reject_unknown(s, "sim",
                 {"dt", "horizon", "master_seed", "mode", "output_grid",
                  "record_steps"});
  SimConfig c;
  if (!s.contains("master_seed"))
    throw ConfigError("sim.master_seed", "missing");
  if (!s["master_seed"].is_number_unsigned() && !s["master_seed"].is_number_integer())
    throw ConfigError("sim.master_seed", "expected an integer seed");
  c.master_seed = s["master_seed"].get<std::uint64_t>();
  c.horizon = number(require(s, "sim", "horizon"), "sim.horizon");
  if (s.contains("dt")) c.dt = number(s["dt"], "sim.dt");
  if (s.contains("mode")) {
    const std::string m = s["mode"].get<std::string>();
    if (m == "unregulated")
      c.mode = Mode::unregulated;
    else if (m == "regulated")
      c.mode = Mode::regulated;
    else
      throw ConfigError("sim.mode", "expected 'unregulated' or 'regulated'");
  }
  if (s.contains("output_grid"))
    c.output_grid = number_array(s["output_grid"], "sim.output_grid");
  if (s.contains("record_steps")) {
    if (!s["record_steps"].is_boolean())
      throw ConfigError("sim.record_steps", "expected a boolean");
    c.record_steps = s["record_steps"].get<bool>();
  }
  return c;
}

inline const std::set<std::string>& option_keys(const std::string& experiment) {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"simulate", {"initial"}},
      {"check", {"infinite", "m"}},
      {"invariant",
       {"initial_gaps", "t", "replicas", "burn_in", "method", "exp_rate"}},
      {"tv", {"init_a", "init_b", "times", "replicas"}},
      {"couple-verify",
       {"which", "paths", "initial", "init_low", "init_high", "x0", "k"}},
      {"infinite",
       {"kind", "gamma1", "gamma2", "prefix", "k", "epsilon", "m",
        "coordinates", "times", "replicas", "level_y"}},
  };
  const auto it = keys.find(experiment);
  if (it == keys.end())
    throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  return it->second;
}

}  // namespace config_detail

inline RunConfig parse_config(const nlohmann::json& doc) {
  using namespace config_detail;
  if (!doc.is_object()) throw ConfigError("", "top-level document must be an object");
  reject_unknown(doc, "", {"system", "law", "sim", "experiment", "options", "out"});
  RunConfig cfg;
  cfg.system = parse_system(require(doc, "", "system"));
  cfg.law = parse_law(require(doc, "", "law"));
  cfg.sim = parse_sim(require(doc, "", "sim"));
  cfg.experiment = require(doc, "", "experiment").get<std::string>();
  if (doc.contains("options")) {
    if (!doc["options"].is_object())
      throw ConfigError("options", "expected an object");
    cfg.options = doc["options"];
  }
  reject_unknown(cfg.options, "options", option_keys(cfg.experiment));
  if (doc.contains("out")) {
    reject_unknown(doc["out"], "out", {"dir", "prefix"});
    if (doc["out"].contains("dir"))
      cfg.out_dir = doc["out"]["dir"].get<std::string>();
    if (doc["out"].contains("prefix"))
      cfg.out_prefix = doc["out"]["prefix"].get<std::string>();
  }
  cfg.system.validate(cfg.sim.mode);
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<input>", e.what());
  }
  return parse_config(doc);
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot read config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline nlohmann::json serialize_config(const RunConfig& cfg) {
  nlohmann::json doc;
  nlohmann::json sys;
  sys["n"] = cfg.system.n;
  sys["deltas"] = cfg.system.deltas;
  sys["sigmas"] = cfg.system.sigmas;
  if (cfg.system.barrier) sys["barrier"] = *cfg.system.barrier;
  if (!cfg.system.tie_order.empty()) sys["tie_order"] = cfg.system.tie_order;
  if (cfg.system.allow_zero_sigma) sys["allow_zero_sigma"] = true;
  doc["system"] = sys;

  nlohmann::json law;
  law["kind"] = to_string(cfg.law.kind);
  law["rate"] = cfg.law.rate;
  nlohmann::json pr;
  switch (cfg.law.kind) {
    case JumpKind::two_point:
      pr["up"] = cfg.law.params[0];
      pr["down"] = cfg.law.params[1];
      pr["p_up"] = cfg.law.params[2];
      break;
    case JumpKind::uniform_symmetric:
      pr["a"] = cfg.law.params[0];
      break;
    case JumpKind::laplace:
      pr["scale"] = cfg.law.params[0];
      break;
    case JumpKind::discrete_table: {
      std::vector<double> values, weights;
      for (std::size_t i = 0; i + 1 < cfg.law.params.size(); i += 2) {
        values.push_back(cfg.law.params[i]);
        weights.push_back(cfg.law.params[i + 1]);
      }
      pr["values"] = values;
      pr["weights"] = weights;
      break;
    }
  }
  law["params"] = pr;
  doc["law"] = law;

  nlohmann::json sim;
  sim["master_seed"] = cfg.sim.master_seed;
  sim["horizon"] = cfg.sim.horizon;
  sim["dt"] = cfg.sim.dt;
  sim["mode"] =
      cfg.sim.mode == Mode::unregulated ? "unregulated" : "regulated";
  if (!cfg.sim.output_grid.empty()) sim["output_grid"] = cfg.sim.output_grid;
  if (cfg.sim.record_steps) sim["record_steps"] = true;
  doc["sim"] = sim;

  doc["experiment"] = cfg.experiment;
  if (!cfg.options.empty()) doc["options"] = cfg.options;
  doc["out"] = {{"dir", cfg.out_dir}, {"prefix", cfg.out_prefix}};
  return doc;
}

}  // namespace cps
