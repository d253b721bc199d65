#include <iostream>

#include <CLI11.hpp>

#include "metanav/harness.hpp"

namespace mh = metanav::harness;

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning and TD3 experiments for LIDAR navigation"};
  app.set_version_flag("--version", std::string(mh::version_string()));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train from a preset or config file");
  run->allow_extras();
  std::string target;
  std::uint64_t run_seed = 0;
  std::string out_dir;
  run->add_option("preset", target, "Preset name or config file path")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "Run seed");
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on held-out tasks");
  std::string eval_ckpt;
  int episodes = 10;
  bool adapt = false;
  std::uint64_t eval_seed = 0;
  eval->add_option("checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Number of episodes")->check(CLI::NonNegativeNumber);
  eval->add_flag("--adapt", adapt, "One inner adaptation per task first (MAML)");
  auto* eval_seed_opt = eval->add_option("--seed", eval_seed, "Evaluation seed (default: run seed)");

  auto* exp = app.add_subcommand("export-rollout", "Write one deterministic episode as JSON lines");
  std::string exp_ckpt, exp_out;
  std::uint64_t task_seed = 0;
  exp->add_option("checkpoint", exp_ckpt)->required()->check(CLI::ExistingFile);
  exp->add_option("--task-seed", task_seed)->required();
  exp->add_option("--out", exp_out)->required();

  auto* presets = app.add_subcommand("presets", "List presets");
  auto* keys = app.add_subcommand("keys", "List config keys with a preset's values");
  std::string keys_preset = "maml-1";
  keys->add_option("preset", keys_preset);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::optional<std::uint64_t> seed;
      if (*seed_opt) seed = run_seed;
      const auto overrides = mh::parse_overrides(run->remaining());
      const auto outcome = mh::run_experiment(target, seed, out_dir, overrides, std::cerr);
      return outcome.exit_code;
    }
    if (*eval) {
      const auto ckpt = mh::load_checkpoint(eval_ckpt);
      const auto cfg = ckpt.config();
      const auto summary =
          mh::evaluate(ckpt, cfg.setup, episodes, *eval_seed_opt ? eval_seed : cfg.seed, adapt);
      std::cout << mh::to_json(summary).dump(2) << '\n';
      return 0;
    }
    if (*exp) {
      const auto ckpt = mh::load_checkpoint(exp_ckpt);
      const auto steps = mh::export_rollout(ckpt, task_seed, exp_out);
      std::cerr << "wrote " << steps << " steps to " << exp_out << '\n';
      return 0;
    }
    if (*presets) {
      for (const auto& p : mh::preset_names()) std::cout << p << '\n';
      return 0;
    }
    if (*keys) {
      std::cout << mh::to_config_text(mh::make_preset(keys_preset));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
