#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "metanav/harness.hpp"

#ifndef METANAV_VERSION
#define METANAV_VERSION "unknown"
#endif

namespace metanav::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string format(int v) { return std::to_string(v); }
std::string format(long v) { return std::to_string(v); }
std::string format(std::size_t v) { return std::to_string(v); }
std::string format(std::uint64_t v, int) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + what + ")");
}

void parse(const std::string& key, const std::string& s, double& out) {
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE) bad_value(key, s, "a number");
}

void parse(const std::string& key, const std::string& s, long long& out) {
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) bad_value(key, s, "an integer");
}

void parse(const std::string& key, const std::string& s, int& out) {
  long long v;
  parse(key, s, v);
  out = static_cast<int>(v);
}

void parse(const std::string& key, const std::string& s, long& out) {
  long long v;
  parse(key, s, v);
  out = static_cast<long>(v);
}

void parse(const std::string& key, const std::string& s, std::size_t& out) {
  long long v;
  parse(key, s, v);
  if (v < 0) bad_value(key, s, "a non-negative integer");
  out = static_cast<std::size_t>(v);
}

void parse(const std::string& key, const std::string& s, std::uint64_t& out, int) {
  char* end = nullptr;
  errno = 0;
  out = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || *end != '\0' || errno == ERANGE)
    bad_value(key, s, "an unsigned integer");
}

void parse(const std::string& key, const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") out = true;
  else if (s == "false" || s == "0" || s == "no") out = false;
  else bad_value(key, s, "true or false");
}

void parse(const std::string& key, const std::string& s, std::vector<int>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v;
    parse(key, trim(item), v);
    out.push_back(v);
  }
}

struct Entry {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Entry field(std::string key, T& (*ref)(ExperimentConfig&)) {
  return {key,
          [ref](const ExperimentConfig& c) { return format(ref(const_cast<ExperimentConfig&>(c))); },
          [ref, key](ExperimentConfig& c, const std::string& v) { parse(key, v, ref(c)); }};
}

#define METANAV_FIELD(key, expr) \
  field(key, +[](ExperimentConfig& c) -> decltype(auto) { return (expr); })

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back({"run.algorithm", [](const ExperimentConfig& c) { return to_string(c.algorithm); },
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "maml") c.algorithm = Algorithm::Maml;
                   else if (v == "td3") c.algorithm = Algorithm::Td3;
                   else bad_value("run.algorithm", v, "maml or td3");
                 }});
    e.push_back({"run.seed", [](const ExperimentConfig& c) { return format(c.seed, 0); },
                 [](ExperimentConfig& c, const std::string& v) { parse("run.seed", v, c.seed, 0); }});

    e.push_back(METANAV_FIELD("task.arena_half_extent", c.setup.task.arena_half_extent));
    e.push_back(METANAV_FIELD("task.min_obstacles", c.setup.task.min_obstacles));
    e.push_back(METANAV_FIELD("task.max_obstacles", c.setup.task.max_obstacles));
    e.push_back(METANAV_FIELD("task.min_obstacle_radius", c.setup.task.min_obstacle_radius));
    e.push_back(METANAV_FIELD("task.max_obstacle_radius", c.setup.task.max_obstacle_radius));
    e.push_back(METANAV_FIELD("task.min_goal_distance", c.setup.task.min_goal_distance));
    e.push_back(METANAV_FIELD("task.max_goal_distance", c.setup.task.max_goal_distance));
    e.push_back(METANAV_FIELD("task.random_start", c.setup.task.random_start));
    e.push_back(METANAV_FIELD("task.start_x", c.setup.task.fixed_start.x));
    e.push_back(METANAV_FIELD("task.start_y", c.setup.task.fixed_start.y));
    e.push_back(METANAV_FIELD("task.start_theta", c.setup.task.fixed_start.theta));
    e.push_back(METANAV_FIELD("task.placement_margin", c.setup.task.placement_margin));

    e.push_back(METANAV_FIELD("env.v_max", c.setup.env.v_max));
    e.push_back(METANAV_FIELD("env.omega_max", c.setup.env.omega_max));
    e.push_back(METANAV_FIELD("env.dt", c.setup.env.dt));
    e.push_back(METANAV_FIELD("env.robot_radius", c.setup.env.robot_radius));
    e.push_back(METANAV_FIELD("env.goal_radius", c.setup.env.goal_radius));
    e.push_back(METANAV_FIELD("env.lidar_range", c.setup.env.lidar_range));
    e.push_back(METANAV_FIELD("env.horizon", c.setup.env.horizon));

    e.push_back({"reward.variant",
                 [](const ExperimentConfig& c) { return rewards::to_string(c.setup.reward.variant); },
                 [](ExperimentConfig& c, const std::string& v) {
                   try {
                     c.setup.reward.variant = rewards::parse_variant(v);
                   } catch (const std::invalid_argument&) {
                     bad_value("reward.variant", v, "R1 or R2");
                   }
                 }});
    e.push_back(METANAV_FIELD("reward.goal_bonus_enabled", c.setup.reward.goal_bonus_enabled));
    e.push_back(METANAV_FIELD("reward.critical_radius", c.setup.reward.critical_radius));
    e.push_back(METANAV_FIELD("reward.safe_radius", c.setup.reward.safe_radius));
    e.push_back(METANAV_FIELD("reward.target_coeff", c.setup.reward.target_coeff));
    e.push_back(METANAV_FIELD("reward.goal_bonus", c.setup.reward.goal_bonus));
    e.push_back(METANAV_FIELD("reward.collision_penalty", c.setup.reward.collision_penalty));
    e.push_back(METANAV_FIELD("reward.step_penalty", c.setup.reward.step_penalty));
    e.push_back(METANAV_FIELD("reward.critical_penalty", c.setup.reward.critical_penalty));

    e.push_back(METANAV_FIELD("maml.meta_iterations", c.maml.meta_iterations));
    e.push_back(METANAV_FIELD("maml.meta_batch_size", c.maml.meta_batch_size));
    e.push_back(METANAV_FIELD("maml.trajectories_per_task", c.maml.trajectories_per_task));
    e.push_back(METANAV_FIELD("maml.inner_lr", c.maml.inner_lr));
    e.push_back(METANAV_FIELD("maml.kl_bound", c.maml.kl_bound));
    e.push_back(METANAV_FIELD("maml.gamma", c.maml.gamma));
    e.push_back(METANAV_FIELD("maml.gae_lambda", c.maml.gae_lambda));
    e.push_back(METANAV_FIELD("maml.inner_steps", c.maml.inner_steps));
    e.push_back(METANAV_FIELD("maml.cg_iterations", c.maml.cg_iterations));
    e.push_back(METANAV_FIELD("maml.cg_damping", c.maml.cg_damping));
    e.push_back(METANAV_FIELD("maml.line_search_backtracks", c.maml.line_search_backtracks));
    e.push_back(METANAV_FIELD("maml.line_search_ratio", c.maml.line_search_ratio));
    e.push_back(METANAV_FIELD("maml.baseline_ridge", c.maml.baseline_ridge));
    e.push_back(METANAV_FIELD("maml.normalize_advantages", c.maml.normalize_advantages));
    e.push_back(METANAV_FIELD("maml.first_order", c.maml.first_order));
    e.push_back(METANAV_FIELD("maml.hidden_dims", c.maml.hidden_dims));
    e.push_back(METANAV_FIELD("maml.initial_log_std", c.maml.initial_log_std));
    e.push_back(METANAV_FIELD("maml.checkpoint_every", c.maml.checkpoint_every));

    e.push_back(METANAV_FIELD("td3.buffer_capacity", c.td3.buffer_capacity));
    e.push_back(METANAV_FIELD("td3.prefill", c.td3.prefill));
    e.push_back(METANAV_FIELD("td3.total_steps", c.td3.total_steps));
    e.push_back(METANAV_FIELD("td3.tau", c.td3.tau));
    e.push_back(METANAV_FIELD("td3.policy_delay", c.td3.policy_delay));
    e.push_back(METANAV_FIELD("td3.exploration_sigma", c.td3.exploration_sigma));
    e.push_back(METANAV_FIELD("td3.smoothing_sigma", c.td3.smoothing_sigma));
    e.push_back(METANAV_FIELD("td3.noise_clip", c.td3.noise_clip));
    e.push_back(METANAV_FIELD("td3.gamma", c.td3.gamma));
    e.push_back(METANAV_FIELD("td3.batch_size", c.td3.batch_size));
    e.push_back(METANAV_FIELD("td3.actor_lr", c.td3.actor_lr));
    e.push_back(METANAV_FIELD("td3.critic_lr", c.td3.critic_lr));
    e.push_back(METANAV_FIELD("td3.hidden_dims", c.td3.hidden_dims));
    e.push_back(METANAV_FIELD("td3.checkpoint_every", c.td3.checkpoint_every));
    e.push_back(METANAV_FIELD("td3.moving_average_window", c.td3.moving_average_window));
    return e;
  }();
  return entries;
}

#undef METANAV_FIELD

const Entry& entry(const std::string& qualified) {
  for (const Entry& e : registry())
    if (e.key == qualified) return e;
  throw ConfigError("unknown config key '" + qualified + "'");
}

ExperimentConfig base_maml() {
  ExperimentConfig c;
  c.algorithm = Algorithm::Maml;
  return c;
}

ExperimentConfig base_td3() {
  ExperimentConfig c;
  c.algorithm = Algorithm::Td3;
  return c;
}

void shrink_maml(ExperimentConfig& c) {
  c.maml.meta_batch_size = 5;
  c.maml.trajectories_per_task = 5;
  c.maml.meta_iterations = 20;
  c.setup.env.horizon = 100;
}

void shrink_td3(ExperimentConfig& c) {
  c.td3.buffer_capacity = 2'000;
  c.td3.prefill = 1'000;
  c.td3.total_steps = 10'000;
  c.td3.checkpoint_every = 2'000;
  c.td3.hidden_dims = {64, 64};
  c.td3.batch_size = 64;
}

}  // namespace

std::string to_string(Algorithm a) { return a == Algorithm::Maml ? "maml" : "td3"; }

const char* version_string() { return METANAV_VERSION; }

std::vector<std::string> preset_names() {
  return {"maml-1",      "maml-2",      "maml-3",      "td3-1",      "td3-2",      "td3-3",
          "maml-1-mini", "maml-2-mini", "maml-3-mini", "td3-1-mini", "td3-2-mini", "td3-3-mini"};
}

ExperimentConfig make_preset(const std::string& name) {
  std::string base = name;
  const bool mini = base.size() > 5 && base.ends_with("-mini");
  if (mini) base.resize(base.size() - 5);

  ExperimentConfig c;
  if (base == "maml-1") {
    c = base_maml();
    c.setup.reward.variant = rewards::Variant::R1;
    c.setup.reward.goal_bonus_enabled = false;
    c.setup.task.random_start = true;
  } else if (base == "maml-2") {
    c = base_maml();
    c.setup.reward.variant = rewards::Variant::R1;
    c.setup.reward.goal_bonus_enabled = true;
    c.setup.reward.critical_radius = 0.5;
    c.setup.reward.safe_radius = 1.5;
    c.setup.task.random_start = true;
  } else if (base == "maml-3") {
    c = base_maml();
    c.setup.reward.variant = rewards::Variant::R2;
    c.setup.task.random_start = false;
  } else if (base == "td3-1" || base == "td3-2") {
    c = base_td3();
    c.setup.reward.variant = base == "td3-1" ? rewards::Variant::R1 : rewards::Variant::R2;
    c.td3.buffer_capacity = 20'000;
    c.td3.prefill = 10'000;
    c.td3.total_steps = 100'000;
  } else if (base == "td3-3") {
    c = base_td3();
    c.setup.reward.variant = rewards::Variant::R1;
    c.td3.buffer_capacity = 100'000;
    c.td3.prefill = 90'000;
    c.td3.total_steps = 1'000'000;
    c.td3.checkpoint_every = 100'000;
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "'; valid presets: " + valid);
  }
  if (mini) {
    if (c.algorithm == Algorithm::Maml) shrink_maml(c);
    else shrink_td3(c);
  }
  c.preset = name;
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

std::string resolve_key(const std::string& raw) {
  std::string key = trim(raw);
  std::replace(key.begin(), key.end(), '-', '_');
  for (const Entry& e : registry())
    if (e.key == key) return key;
  std::vector<std::string> matches;
  for (const Entry& e : registry())
    if (e.key.size() > key.size() && e.key.ends_with("." + key)) matches.push_back(e.key);
  if (matches.size() == 1) return matches.front();
  if (matches.empty()) throw ConfigError("unknown config key '" + raw + "'");
  std::string list;
  for (const auto& m : matches) list += (list.empty() ? "" : ", ") + m;
  throw ConfigError("ambiguous config key '" + raw + "' (could be " + list + ")");
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  entry(resolve_key(key)).set(cfg, trim(value));
}

std::string get_value(const ExperimentConfig& cfg, const std::string& key) {
  return entry(resolve_key(key)).get(cfg);
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig config_from_text(const std::string& text) {
  const KeyValues kv = parse_config_text(text);
  ExperimentConfig cfg;
  auto preset = std::find_if(kv.begin(), kv.end(), [](const auto& p) { return p.first == "preset"; });
  if (preset != kv.end()) {
    cfg = preset->second == "custom" ? ExperimentConfig{} : make_preset(preset->second);
    cfg.preset = preset->second;
  } else {
    auto algo = std::find_if(kv.begin(), kv.end(), [](const auto& p) {
      return p.first == "run.algorithm" || p.first == "algorithm";
    });
    if (algo != kv.end() && algo->second == "td3") cfg = base_td3();
  }
  for (const auto& [k, v] : kv) {
    if (k == "preset") continue;
    set_value(cfg, k, v);
  }
  return cfg;
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out = "# metanav " + std::string(version_string()) + "\n";
  out += "preset = " + cfg.preset + "\n";
  for (const Entry& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

KeyValues parse_overrides(const std::vector<std::string>& tokens) {
  KeyValues out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string t = tokens[i];
    if (!t.starts_with("--")) throw ConfigError("unexpected argument '" + t + "'");
    t = t.substr(2);
    const auto eq = t.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(t.substr(0, eq), t.substr(eq + 1));
    } else if (i + 1 < tokens.size() && !tokens[i + 1].starts_with("--")) {
      out.emplace_back(t, tokens[++i]);
    } else {
      throw ConfigError("override '--" + t + "' has no value");
    }
  }
  return out;
}

ExperimentConfig resolve_config(const std::string& preset_or_path, const KeyValues& overrides) {
  ExperimentConfig cfg;
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
    cfg = make_preset(preset_or_path);
  } else if (std::filesystem::is_regular_file(preset_or_path)) {
    std::ifstream in(preset_or_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = config_from_text(ss.str());
  } else {
    cfg = make_preset(preset_or_path);  // throws with the preset list
  }
  for (const auto& [k, v] : overrides) set_value(cfg, k, v);
  return cfg;
}

}  // namespace metanav::harness
