#include <CLI11.hpp>

#include <cstdio>

#include "dicycle/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"DiCycle lab: synthetic data generation, training, ablation and probing"};
  app.require_subcommand(1);

  std::string spec_path, out_path, config_path, checkpoint_path;
  std::uint64_t seed = 0;
  bool have_seed = false;
  dicycle::CliOverrides overrides;
  std::string variant;
  int horizon = 72;
  std::int64_t step_seconds = 3600;
  std::size_t index = 0;
  bool have_index = false;
  std::string user, item;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic planted-cycle event log");
  gen->add_option("--config", spec_path, "Synthetic spec file (defaults built in)");
  gen->add_option("--out", out_path, "Output event-log path")->required();
  gen->add_option("--seed", seed, "Override the spec seed")->each([&](const std::string&) {
    have_seed = true;
  });

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config file")->required();
    cmd->add_option("--out", overrides.out, "Override out_dir");
    cmd->add_option("--seed", overrides.seed, "Override seed");
    cmd->add_option("--variant", overrides.variant, "Override model variant");
    cmd->add_flag("--force", overrides.force, "Allow reuse of an existing run directory");
  };

  auto* tr = app.add_subcommand("train", "Train one variant and write a run directory");
  add_train_flags(tr);

  auto* ab = app.add_subcommand("ablate", "Train DiCycle plus the three ablations and tabulate");
  add_train_flags(ab);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the config's test split");
  ev->add_option("--config", config_path, "Experiment config file")->required();
  ev->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  ev->add_option("--out", out_path, "Report CSV path (stdout otherwise)");

  auto* pr = app.add_subcommand("probe", "Timestamp-sweep scores for one (user, item) pair");
  pr->add_option("--config", config_path, "Experiment config file")->required();
  pr->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  pr->add_option("--index", index, "Test-sample index to probe")->each([&](const std::string&) {
    have_index = true;
  });
  pr->add_option("--user", user, "User id (with --item)");
  pr->add_option("--item", item, "Item id (with --user)");
  pr->add_option("--horizon", horizon, "Sweep horizon in hours");
  pr->add_option("--step", step_seconds, "Sweep step in seconds");
  pr->add_option("--out", out_path, "Sweep CSV path (stdout otherwise)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return dicycle::cmd_generate(spec_path, out_path,
                                   have_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
    if (tr->parsed()) return dicycle::cmd_train(config_path, overrides);
    if (ab->parsed()) return dicycle::cmd_ablate(config_path, overrides);
    if (ev->parsed()) return dicycle::cmd_eval(config_path, checkpoint_path, out_path);
    if (pr->parsed()) {
      dicycle::ProbeSelector sel;
      if (have_index) sel.test_index = index;
      if (!user.empty()) sel.user = user;
      if (!item.empty()) sel.item = item;
      return dicycle::cmd_probe(config_path, checkpoint_path, sel, horizon, step_seconds,
                                out_path);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
