#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "metanav/harness.hpp"

using namespace metanav;
using namespace metanav::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("metanav_test_" + name);
  fs::remove_all(p);
  return p;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

const KeyValues kTinyMaml = {{"meta-iterations", "2"},
                             {"meta-batch-size", "2"},
                             {"trajectories-per-task", "2"},
                             {"horizon", "30"},
                             {"maml.hidden_dims", "8"}};

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("presets encode the experiment variants") {
  const auto m1 = make_preset("maml-1");
  CHECK(m1.algorithm == Algorithm::Maml);
  CHECK_FALSE(m1.setup.reward.goal_bonus_enabled);
  CHECK(m1.setup.task.random_start);
  const auto m2 = make_preset("maml-2");
  CHECK(m2.setup.reward.goal_bonus_enabled);
  CHECK(m2.setup.reward.critical_radius == 0.5);
  CHECK(m2.setup.reward.safe_radius == 1.5);
  const auto m3 = make_preset("maml-3");
  CHECK(m3.setup.reward.variant == rewards::Variant::R2);
  CHECK_FALSE(m3.setup.task.random_start);
  const auto t1 = make_preset("td3-1");
  CHECK(t1.td3.buffer_capacity == 20'000);
  CHECK(t1.td3.prefill == 10'000);
  CHECK(t1.td3.total_steps == 100'000);
  CHECK(make_preset("td3-2").setup.reward.variant == rewards::Variant::R2);
  const auto t3 = make_preset("td3-3");
  CHECK(t3.td3.buffer_capacity == 100'000);
  CHECK(t3.td3.prefill == 90'000);
  CHECK(t3.td3.total_steps == 1'000'000);
  for (const auto& name : preset_names()) {
    const auto c = make_preset(name);
    CHECK_NOTHROW(c.setup.reward.check());
    if (c.algorithm == Algorithm::Maml) CHECK_NOTHROW(c.maml.check());
    else CHECK_NOTHROW(c.td3.check());
  }
}

TEST_CASE("unknown preset lists the valid ones") {
  try {
    make_preset("maml-9");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("maml-1") != std::string::npos);
    CHECK(msg.find("td3-3-mini") != std::string::npos);
  }
}

TEST_CASE("key resolution") {
  CHECK(resolve_key("meta-iterations") == "maml.meta_iterations");
  CHECK(resolve_key("td3.tau") == "td3.tau");
  CHECK_THROWS_AS(resolve_key("gamma"), ConfigError);
  CHECK_THROWS_AS(resolve_key("bogus"), ConfigError);
}

TEST_CASE("snapshot reproduces the config") {
  auto cfg = make_preset("td3-2-mini");
  set_value(cfg, "td3.tau", "0.1234567890123");
  set_value(cfg, "seed", "99");
  set_value(cfg, "td3.hidden_dims", "7,9");
  const std::string text = to_config_text(cfg);
  const auto back = config_from_text(text);
  CHECK(to_config_text(back) == text);
  CHECK(back.td3.tau == 0.1234567890123);
  CHECK(back.td3.hidden_dims == std::vector<int>{7, 9});
  CHECK(back.seed == 99);
}

TEST_CASE("override precedence") {
  const fs::path dir = scratch("precedence");
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.txt") << "preset = maml-2\n# comment\nmaml.inner_lr = 0.05\nreward.safe_radius = 2\n";
  const auto cfg = resolve_config((dir / "cfg.txt").string(), {{"inner-lr", "0.2"}});
  CHECK(cfg.maml.inner_lr == 0.2);
  CHECK(cfg.setup.reward.safe_radius == 2.0);
  CHECK(cfg.setup.reward.critical_radius == 0.5);
  CHECK_THROWS_AS(config_from_text("nonsense line"), ConfigError);
  CHECK_THROWS_AS(config_from_text("td3.tau = abc"), ConfigError);
}

TEST_CASE("override tokens") {
  const auto kv = parse_overrides({"--a=1", "--b", "2"});
  REQUIRE(kv.size() == 2);
  CHECK(kv[1] == std::pair<std::string, std::string>{"b", "2"});
  CHECK_THROWS_AS(parse_overrides({"--dangling"}), ConfigError);
}

TEST_CASE("run, evaluate and export") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  std::ostringstream log;
  const auto ra = run_experiment("maml-1", 1, a, kTinyMaml, log);
  REQUIRE(ra.exit_code == 0);
  CHECK(count_lines(a / "metrics.csv") == 3);
  CHECK(fs::exists(a / "config.txt"));
  CHECK(fs::exists(a / "summary.json"));
  CHECK(fs::exists(a / "checkpoints" / "ckpt_0.json"));
  CHECK(fs::exists(a / "checkpoints" / "ckpt_2.json"));
  REQUIRE(run_experiment("maml-1", 1, b, kTinyMaml, log).exit_code == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));

  const fs::path c = scratch("run_c");
  REQUIRE(run_experiment((a / "config.txt").string(), std::nullopt, c, {}, log).exit_code == 0);
  CHECK(slurp(c / "metrics.csv") == slurp(a / "metrics.csv"));

  const Checkpoint ckpt = load_checkpoint(a / "checkpoints" / "ckpt_2.json");
  const auto cfg = ckpt.config();
  CHECK(evaluate(ckpt, cfg.setup, 0, 1, false).episodes == 0);
  TaskSetup open = cfg.setup;
  open.task.min_obstacles = open.task.max_obstacles = 0;
  const auto plain = evaluate(ckpt, open, 3, 1, false);
  const auto adapted = evaluate(ckpt, open, 3, 1, true);
  CHECK(plain.goal_rate + plain.collision_rate <= 1.0);
  CHECK(adapted.adapted);

  const fs::path roll1 = a / "roll1.jsonl", roll2 = a / "roll2.jsonl";
  const auto steps = export_rollout(ckpt, 17, roll1);
  export_rollout(ckpt, 17, roll2);
  CHECK(count_lines(roll1) == steps + 1);
  CHECK(slurp(roll1) == slurp(roll2));
}

TEST_CASE("stationary policy exports identical poses") {
  Checkpoint ckpt;
  ckpt.algorithm = Algorithm::Td3;
  ckpt.actor = ad::ParamVector({world::kObservationDim, {4}, world::kActionDim,
                                ad::Activation::ReLU, ad::Activation::Tanh});
  auto cfg = make_preset("td3-1-mini");
  set_value(cfg, "horizon", "20");
  ckpt.config_text = to_config_text(cfg);
  const fs::path out = scratch("stationary.jsonl");
  CHECK(export_rollout(ckpt, 5, out) == 20);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  std::string first_pose;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::string pose = j["x"].dump() + j["y"].dump() + j["theta"].dump();
    if (first_pose.empty()) first_pose = pose;
    CHECK(pose == first_pose);
  }
}

TEST_CASE("architecture mismatch is rejected") {
  Checkpoint ckpt;
  ckpt.algorithm = Algorithm::Td3;
  ckpt.actor = ad::ParamVector({10, {4}, 2, ad::Activation::ReLU, ad::Activation::Tanh});
  ckpt.config_text = to_config_text(make_preset("td3-1-mini"));
  CHECK_THROWS_AS(evaluate(ckpt, {}, 1, 1, false), ConfigError);
  ckpt.actor = ad::ParamVector({world::kObservationDim, {4}, 2, ad::Activation::ReLU, ad::Activation::Tanh});
  CHECK_THROWS_AS(evaluate(ckpt, {}, 1, 1, true), ConfigError);
}

TEST_CASE("bad config gives a nonzero exit") {
  std::ostringstream log;
  CHECK(run_experiment("no-such-preset", 1, scratch("bad"), {}, log).exit_code != 0);
  CHECK(log.str().find("valid presets") != std::string::npos);
  CHECK(run_experiment("maml-1", 1, scratch("bad2"), {{"reward.safe_radius", "0.1"}}, log).exit_code != 0);
}

}
