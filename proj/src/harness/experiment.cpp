#include <chrono>
#include <fstream>
#include <ostream>

#include "metanav/harness.hpp"

namespace metanav::harness {

namespace fs = std::filesystem;

nlohmann::json checkpoint_json(const Checkpoint& c) {
  nlohmann::json j;
  j["kind"] = to_string(c.algorithm);
  j["step"] = c.step;
  j["version"] = version_string();
  j["config"] = c.config_text;
  if (c.algorithm == Algorithm::Maml) j["policy"] = c.policy;
  else j["actor"] = c.actor;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "maml") c.algorithm = Algorithm::Maml;
  else if (kind == "td3") c.algorithm = Algorithm::Td3;
  else throw ConfigError("checkpoint: unknown kind '" + kind + "'");
  c.step = j.at("step").get<long>();
  c.config_text = j.at("config").get<std::string>();
  if (c.algorithm == Algorithm::Maml) c.policy = j.at("policy").get<ad::GaussianPolicy>();
  else c.actor = j.at("actor").get<ad::ParamVector>();
  return c;
}

void save_checkpoint(const Checkpoint& c, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_json(c).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

namespace {

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << '\n' << std::flush;
  }
  void row(const std::string& line) {
    out_ << line << '\n' << std::flush;
    ++rows_;
  }
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t rows_ = 0;
};

struct MamlRunSink final : maml::MamlSink {
  CsvWriter csv;
  fs::path ckpt_dir;
  std::string config_text;
  maml::MamlMetricsRow last;

  MamlRunSink(const fs::path& dir, std::string text)
      : csv(dir / "metrics.csv", maml::maml_csv_header()),
        ckpt_dir(dir / "checkpoints"),
        config_text(std::move(text)) {}

  void on_row(const maml::MamlMetricsRow& row) override {
    csv.row(maml::to_csv(row));
    last = row;
  }
  void on_checkpoint(int it, const ad::GaussianPolicy& policy) override {
    Checkpoint c;
    c.algorithm = Algorithm::Maml;
    c.policy = policy;
    c.step = it;
    c.config_text = config_text;
    save_checkpoint(c, ckpt_dir / ("ckpt_" + std::to_string(it) + ".json"));
  }
};

struct Td3RunSink final : td3::Td3Sink {
  CsvWriter csv;
  fs::path ckpt_dir;
  std::string config_text;
  td3::Td3MetricsRow last;
  long goals = 0;
  long collisions = 0;

  Td3RunSink(const fs::path& dir, std::string text)
      : csv(dir / "metrics.csv", td3::td3_csv_header()),
        ckpt_dir(dir / "checkpoints"),
        config_text(std::move(text)) {}

  void on_row(const td3::Td3MetricsRow& row) override {
    csv.row(td3::to_csv(row));
    goals += row.goal_reached;
    collisions += row.collided;
    last = row;
  }
  void on_checkpoint(long step, const ad::ParamVector& actor) override {
    Checkpoint c;
    c.algorithm = Algorithm::Td3;
    c.actor = actor;
    c.step = step;
    c.config_text = config_text;
    save_checkpoint(c, ckpt_dir / ("ckpt_" + std::to_string(step) + ".json"));
  }
};

void write_summary(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

}  // namespace

RunOutcome run_experiment(const std::string& preset_or_path, std::optional<std::uint64_t> seed,
                          const fs::path& out_dir, const KeyValues& overrides, std::ostream& log) {
  RunOutcome outcome;
  ExperimentConfig cfg;
  try {
    cfg = resolve_config(preset_or_path, overrides);
    if (seed) cfg.seed = *seed;
    cfg.setup.reward.check();
    if (cfg.algorithm == Algorithm::Maml) cfg.maml.check();
    else cfg.td3.check();
  } catch (const std::exception& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
    log << "error: " << e.what() << '\n';
    return outcome;
  }

  std::error_code ec;
  fs::create_directories(out_dir / "checkpoints", ec);
  if (ec) {
    outcome.exit_code = 2;
    outcome.message = "cannot create " + out_dir.string() + ": " + ec.message();
    log << "error: " << outcome.message << '\n';
    return outcome;
  }

  const std::string config_text = to_config_text(cfg);
  {
    std::ofstream snap(out_dir / "config.txt");
    snap << config_text;
  }
  outcome.metrics_path = out_dir / "metrics.csv";
  log << "metanav " << version_string() << ": " << cfg.preset << " (" << to_string(cfg.algorithm)
      << "), seed " << cfg.seed << " -> " << out_dir.string() << '\n';

  nlohmann::json summary;
  summary["preset"] = cfg.preset;
  summary["algorithm"] = to_string(cfg.algorithm);
  summary["seed"] = cfg.seed;
  summary["version"] = version_string();

  const auto start = std::chrono::steady_clock::now();
  try {
    if (cfg.algorithm == Algorithm::Maml) {
      MamlRunSink sink(out_dir, config_text);
      const auto rows = maml::run_meta_training(cfg.maml, cfg.setup, cfg.seed, sink);
      outcome.rows = sink.csv.rows();
      summary["meta_iterations"] = rows.size();
      summary["final_return_pre"] = sink.last.mean_return_pre;
      summary["final_return_post"] = sink.last.mean_return_post;
      summary["final_moving_avg_return"] = sink.last.mean_return_post;
      summary["goal_rate"] = sink.last.goal_rate;
      summary["collision_rate"] = sink.last.collision_rate;
    } else {
      Td3RunSink sink(out_dir, config_text);
      const auto rows = td3::run_td3_training(cfg.td3, cfg.setup, cfg.seed, sink);
      outcome.rows = sink.csv.rows();
      const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
      summary["episodes"] = rows.size();
      summary["env_steps"] = cfg.td3.total_steps;
      summary["final_moving_avg_return"] = sink.last.moving_avg_return;
      summary["goal_rate"] = static_cast<double>(sink.goals) / n;
      summary["collision_rate"] = static_cast<double>(sink.collisions) / n;
    }
    summary["status"] = "ok";
  } catch (const std::exception& e) {
    outcome.exit_code = 1;
    outcome.message = e.what();
    summary["status"] = "failed";
    summary["error"] = e.what();
    log << "error: " << e.what() << '\n';
  }
  summary["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_summary(out_dir / "summary.json", summary);
  if (outcome.exit_code == 0) log << "done: " << outcome.rows << " metric rows\n";
  return outcome;
}

}  // namespace metanav::harness
