#pragma once

#include <optional>
#include <string>

#include "dicycle/config.hpp"
#include "dicycle/model.hpp"

namespace dicycle {

// Everything a run needs, resolved from one key-value config file.
struct ExperimentConfig {
  TrainConfig train;
  std::string dataset;
  int negative_ratio = 1;
  std::string out_dir;

  static ExperimentConfig from_kv(const KeyValueFile& kv);
  KeyValueFile to_kv() const;
};

struct CliOverrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  bool force = false;
};

// Subcommand bodies; they throw dicycle::Error subclasses on failure and
// return 0 once every output is written and re-validated.
int cmd_generate(const std::string& spec_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override = std::nullopt);

int cmd_train(const std::string& config_path, const CliOverrides& overrides = {});

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& out_path);

int cmd_ablate(const std::string& config_path, const CliOverrides& overrides = {});

struct ProbeSelector {
  std::optional<std::size_t> test_index;  // index into the test split
  std::optional<std::string> user;        // alternatively: a (user, item) pair
  std::optional<std::string> item;
};

int cmd_probe(const std::string& config_path, const std::string& checkpoint_path,
              const ProbeSelector& selector, int horizon_hours, std::int64_t step_seconds,
              const std::string& out_path);

// shared helpers
std::string history_csv(const std::vector<EpochStats>& history);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dicycle
