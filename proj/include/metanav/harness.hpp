#pragma once

// Experiment runner: presets, flat `key = value` configs, run directories,
// checkpoint evaluation and rollout export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "metanav/autodiff/gaussian.hpp"
#include "metanav/maml.hpp"
#include "metanav/td3.hpp"

namespace metanav::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { Maml, Td3 };
std::string to_string(Algorithm a);

struct ExperimentConfig {
  std::string preset = "custom";
  Algorithm algorithm = Algorithm::Maml;
  std::uint64_t seed = 1;
  TaskSetup setup;
  maml::MamlConfig maml;
  td3::Td3Config td3;
};

std::vector<std::string> preset_names();

/// Throws ConfigError listing the valid names when `name` is unknown.
ExperimentConfig make_preset(const std::string& name);

/// All recognised keys, fully qualified (e.g. "td3.tau").
std::vector<std::string> config_keys();

/// Maps a possibly abbreviated key ("meta-iterations") to its qualified form.
std::string resolve_key(const std::string& key);

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const ExperimentConfig& cfg, const std::string& key);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; blank lines and `#` comments are skipped.
KeyValues parse_config_text(const std::string& text);

/// Starts from `preset = ...` when present (else defaults for `run.algorithm`)
/// and applies the remaining keys in order.
ExperimentConfig config_from_text(const std::string& text);

/// Every key with full precision; config_from_text(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& cfg);

/// Turns `--key=value` / `--key value` tokens into key/value pairs.
KeyValues parse_overrides(const std::vector<std::string>& tokens);

/// preset < config file < overrides.
ExperimentConfig resolve_config(const std::string& preset_or_path, const KeyValues& overrides);

const char* version_string();

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  Algorithm algorithm = Algorithm::Maml;
  ad::GaussianPolicy policy;  // MAML
  ad::ParamVector actor;      // TD3
  long step = 0;
  std::string config_text;

  ExperimentConfig config() const { return config_from_text(config_text); }
};

nlohmann::json checkpoint_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Commands

struct RunOutcome {
  int exit_code = 0;
  std::string message;
  std::filesystem::path metrics_path;
  std::size_t rows = 0;
};

/// Writes config.txt, metrics.csv, checkpoints/ and summary.json under out_dir.
RunOutcome run_experiment(const std::string& preset_or_path, std::optional<std::uint64_t> seed,
                          const std::filesystem::path& out_dir, const KeyValues& overrides,
                          std::ostream& log);

struct EvaluationSummary {
  int episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double goal_rate = 0.0;
  double collision_rate = 0.0;
  double mean_length = 0.0;
  bool adapted = false;
};

nlohmann::json to_json(const EvaluationSummary& s);

/// Deterministic (mean-action) rollouts on fresh held-out tasks. With `adapt`
/// (MAML only) each task first gets one inner adaptation from sampled rollouts.
EvaluationSummary evaluate(const Checkpoint& ckpt, const TaskSetup& setup, int n_episodes,
                           std::uint64_t seed, bool adapt);

/// Mean-action policy of a checkpoint as a function of the flat observation.
ad::Vector deterministic_action(const Checkpoint& ckpt, const world::ObservationVector& obs);

/// One episode as JSON lines: a header then one row per step. Returns the step count.
std::size_t export_rollout(const Checkpoint& ckpt, std::uint64_t task_seed,
                           const std::filesystem::path& out_path);

}  // namespace metanav::harness
