#include "dicycle/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

namespace dicycle {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string granularities_to_string(const std::vector<GranularityKind>& gs) {
  std::string out;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (i) out += ',';
    out += make_granularity(gs[i]).name;
  }
  return out;
}

std::vector<GranularityKind> granularities_from_string(const std::string& s) {
  std::vector<GranularityKind> out;
  for (const auto& part : split(s, ',')) {
    const std::string name = trim(part);
    if (!name.empty()) out.push_back(granularity_from_name(name));
  }
  if (out.empty()) throw ConfigError("granularities: empty list");
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValueFile& kv) {
  kv.require_known_keys({"variant", "d", "max_behaviors", "delta_thred", "strict_mask",
                         "granularities", "surrounding_range", "kernel_size", "include_j0",
                         "time_unit_seconds", "tz_offset_seconds", "lr", "batch_size", "epochs",
                         "patience", "seed", "dataset", "negative_ratio", "out_dir", "hidden1",
                         "hidden2"});
  ExperimentConfig cfg;
  ModelConfig& m = cfg.train.model;
  m.variant = variant_from_name(kv.get_or("variant", "DiCycle"));
  m.d = kv.get_int_or("d", m.d);
  m.max_behaviors = kv.get_int_or("max_behaviors", m.max_behaviors);
  m.gate.delta_thred = kv.get_double_or("delta_thred", m.gate.delta_thred);
  m.gate.strict_mask = kv.get_bool_or("strict_mask", m.gate.strict_mask);
  if (kv.has("granularities")) {
    m.time.granularities = granularities_from_string(kv.get("granularities"));
  }
  m.time.surrounding_range = static_cast<int>(kv.get_int_or("surrounding_range", m.time.surrounding_range));
  m.time.kernel_size = kv.get_int_or("kernel_size", m.time.kernel_size);
  m.time.include_j0 = kv.get_bool_or("include_j0", m.time.include_j0);
  m.time.time_unit_seconds = kv.get_double_or("time_unit_seconds", m.time.time_unit_seconds);
  m.time.tz_offset_seconds = kv.get_int_or("tz_offset_seconds", m.time.tz_offset_seconds);
  m.hidden1 = kv.get_int_or("hidden1", m.hidden1);
  m.hidden2 = kv.get_int_or("hidden2", m.hidden2);
  cfg.train.adam.lr = kv.get_double_or("lr", cfg.train.adam.lr);
  cfg.train.batch_size = kv.get_int_or("batch_size", cfg.train.batch_size);
  cfg.train.epochs = static_cast<int>(kv.get_int_or("epochs", cfg.train.epochs));
  cfg.train.patience = static_cast<int>(kv.get_int_or("patience", cfg.train.patience));
  cfg.train.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", 1));
  cfg.dataset = kv.get_or("dataset", "");
  cfg.negative_ratio = static_cast<int>(kv.get_int_or("negative_ratio", 1));
  cfg.out_dir = kv.get_or("out_dir", "");
  return cfg;
}

KeyValueFile ExperimentConfig::to_kv() const {
  KeyValueFile kv;
  const ModelConfig& m = train.model;
  kv.set("variant", variant_name(m.variant));
  kv.set("d", std::to_string(m.d));
  kv.set("max_behaviors", std::to_string(m.max_behaviors));
  kv.set("delta_thred", fmt_double(m.gate.delta_thred));
  kv.set("strict_mask", m.gate.strict_mask ? "true" : "false");
  kv.set("granularities", granularities_to_string(m.time.granularities));
  kv.set("surrounding_range", std::to_string(m.time.surrounding_range));
  kv.set("kernel_size", std::to_string(m.time.kernel_size));
  kv.set("include_j0", m.time.include_j0 ? "true" : "false");
  kv.set("time_unit_seconds", fmt_double(m.time.time_unit_seconds));
  kv.set("tz_offset_seconds", std::to_string(m.time.tz_offset_seconds));
  kv.set("hidden1", std::to_string(m.hidden1));
  kv.set("hidden2", std::to_string(m.hidden2));
  kv.set("lr", fmt_double(train.adam.lr));
  kv.set("batch_size", std::to_string(train.batch_size));
  kv.set("epochs", std::to_string(train.epochs));
  kv.set("patience", std::to_string(train.patience));
  kv.set("seed", std::to_string(train.seed));
  kv.set("dataset", dataset);
  kv.set("negative_ratio", std::to_string(negative_ratio));
  kv.set("out_dir", out_dir);
  return kv;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream os;
  os << "epoch,split,logloss,auc\n";
  for (const auto& h : history) {
    os << h.epoch << ",train," << fmt_double(h.train_logloss) << ',' << fmt_double(h.train_auc)
       << '\n';
    os << h.epoch << ",test," << fmt_double(h.eval_logloss) << ',' << fmt_double(h.eval_auc)
       << '\n';
  }
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << content;
  if (!os) throw DataError("write to " + path + " failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

namespace {

void check_output_exists(const std::string& path) {
  std::error_code ec;
  if (!fs::exists(path, ec) || fs::file_size(path, ec) == 0) {
    throw DataError("expected output " + path + " was not written");
  }
}

void prepare_run_dir(const std::string& dir, bool force) {
  if (dir.empty()) throw ConfigError("no output directory configured (out_dir or --out)");
  if (fs::exists(dir)) {
    const bool has_run_outputs =
        fs::exists(fs::path(dir) / "config.txt") || fs::exists(fs::path(dir) / "checkpoint.bin");
    if (has_run_outputs && !force) {
      throw ConfigError("run directory " + dir + " already holds outputs; pass --force to overwrite");
    }
  }
  fs::create_directories(dir);
}

struct LoadedData {
  EventLog log;
  SampleBuild samples;
};

LoadedData load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("config has no dataset path");
  LoadedData d;
  d.log = ingest(cfg.dataset);
  d.samples = build_samples(d.log, static_cast<std::size_t>(cfg.train.model.max_behaviors),
                            cfg.negative_ratio, mix_seed(cfg.train.seed, 0x73616d70));
  return d;
}

struct RunOutputs {
  MetricReport report;
  std::string dir;
};

RunOutputs run_training(const ExperimentConfig& cfg, const std::string& dir) {
  prepare_run_dir(dir, true);  // caller already applied the --force policy
  const auto t0 = std::chrono::steady_clock::now();
  LoadedData data = load_dataset(cfg);
  auto result = train(cfg.train, static_cast<Index>(data.log.item_names.size()),
                      data.samples.train, data.samples.test);
  const auto t1 = std::chrono::steady_clock::now();

  ExperimentConfig resolved = cfg;
  resolved.out_dir = dir;
  resolved.to_kv().write_file(dir + "/config.txt");
  result.params.save(dir + "/checkpoint.bin");
  write_text_file(dir + "/history.csv", history_csv(result.history));
  write_text_file(dir + "/report.csv", report_csv(result.test_report));

  // wall-clock and other non-reproducible facts live here, not in the CSVs
  std::ostringstream meta;
  meta << "train_seconds = "
       << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0 << "\n"
       << "train_samples = " << data.samples.train.size() << "\n"
       << "test_samples = " << data.samples.test.size() << "\n"
       << "excluded_users = " << data.samples.excluded_users << "\n"
       << "skipped_negatives = " << data.samples.skipped_negatives << "\n"
       << "rejected_rows = " << data.log.rejected_rows << "\n"
       << "gate_zero_norm_total = " << result.gate_zero_norm_total << "\n"
       << "best_epoch = " << result.best_epoch << "\n";
  write_text_file(dir + "/meta.txt", meta.str());

  for (const char* f : {"config.txt", "checkpoint.bin", "history.csv", "report.csv", "meta.txt"}) {
    check_output_exists(dir + "/" + f);
  }
  return {result.test_report, dir};
}

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& o) {
  if (o.out) cfg.out_dir = *o.out;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.variant) cfg.train.model.variant = variant_from_name(*o.variant);
}

}  // namespace

int cmd_generate(const std::string& spec_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override) {
  SyntheticSpec spec = spec_path.empty()
                           ? SyntheticSpec::defaults()
                           : SyntheticSpec::from_kv(KeyValueFile::parse_file(spec_path));
  if (seed_override) spec.seed = *seed_override;
  if (out_path.empty()) throw ConfigError("generate: no output path");
  auto result = generate_synthetic(spec);
  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_event_log(out_path, result.log);
  result.truth.to_kv().write_file(out_path + ".truth");
  check_output_exists(out_path);
  check_output_exists(out_path + ".truth");
  std::printf("wrote %zu events for %zu users to %s\n", result.log.rows.size(),
              result.log.user_names.size(), out_path.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const CliOverrides& overrides) {
  ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueFile::parse_file(config_path));
  apply_overrides(cfg, overrides);
  prepare_run_dir(cfg.out_dir, overrides.force);
  const auto outputs = run_training(cfg, cfg.out_dir);
  std::printf("run %s: test auc %.6f gauc %.6f logloss %.6f\n", outputs.dir.c_str(),
              outputs.report.auc, outputs.report.gauc, outputs.report.logloss);
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& out_path) {
  ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueFile::parse_file(config_path));
  LoadedData data = load_dataset(cfg);
  auto params = ModelParams::init(cfg.train.model, static_cast<Index>(data.log.item_names.size()),
                                  mix_seed(cfg.train.seed, 0x696e6974));
  params.load(checkpoint_path);
  const auto report = evaluate(score_samples(params, data.samples.test, cfg.train.batch_size));
  const std::string csv = report_csv(report);
  if (!out_path.empty()) {
    write_text_file(out_path, csv);
    check_output_exists(out_path);
  }
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_ablate(const std::string& config_path, const CliOverrides& overrides) {
  ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueFile::parse_file(config_path));
  apply_overrides(cfg, overrides);
  prepare_run_dir(cfg.out_dir, overrides.force);

  const ModelVariant variants[] = {ModelVariant::DiCycle, ModelVariant::NoAbsoluteTime,
                                   ModelVariant::NoRelativeTime, ModelVariant::NoTimeCycleModule};
  std::vector<std::future<RunOutputs>> futures;
  for (ModelVariant v : variants) {
    ExperimentConfig sub = cfg;
    sub.train.model.variant = v;
    sub.out_dir = cfg.out_dir + "/" + variant_name(v);
    futures.push_back(std::async(std::launch::async,
                                 [sub]() { return run_training(sub, sub.out_dir); }));
  }
  std::vector<MetricReport> reports;
  for (auto& f : futures) reports.push_back(f.get().report);

  std::ostringstream os;
  os << "variant,auc,gauc,logloss,relaimpr_auc_pct\n";
  for (std::size_t i = 0; i < 4; ++i) {
    os << variant_name(variants[i]) << ',' << fmt_double(reports[i].auc) << ','
       << fmt_double(reports[i].gauc) << ',' << fmt_double(reports[i].logloss) << ',';
    if (i == 0) {
      os << "";  // DiCycle is the target model itself
    } else {
      os << fmt_double(rela_impr(reports[0].auc, reports[i].auc));
    }
    os << '\n';
  }
  write_text_file(cfg.out_dir + "/ablation.csv", os.str());
  check_output_exists(cfg.out_dir + "/ablation.csv");
  std::fputs(os.str().c_str(), stdout);
  return 0;
}

int cmd_probe(const std::string& config_path, const std::string& checkpoint_path,
              const ProbeSelector& selector, int horizon_hours, std::int64_t step_seconds,
              const std::string& out_path) {
  ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueFile::parse_file(config_path));
  LoadedData data = load_dataset(cfg);
  auto params = ModelParams::init(cfg.train.model, static_cast<Index>(data.log.item_names.size()),
                                  mix_seed(cfg.train.seed, 0x696e6974));
  params.load(checkpoint_path);

  Sample probe_sample;
  if (selector.test_index) {
    if (*selector.test_index >= data.samples.test.size()) {
      throw DataError("probe: test index " + std::to_string(*selector.test_index) +
                      " out of range (test set has " + std::to_string(data.samples.test.size()) +
                      " samples)");
    }
    probe_sample = data.samples.test[*selector.test_index];
  } else if (selector.user && selector.item) {
    const std::int64_t u = data.log.user_index(*selector.user);
    const std::int64_t it = data.log.item_index(*selector.item);
    if (u < 0) throw DataError("probe: unknown user '" + *selector.user + "'");
    if (it < 0) throw DataError("probe: unknown item '" + *selector.item + "'");
    std::vector<EventRow> events;
    for (const auto& r : data.log.rows) {
      if (r.user == u && r.label == 1) events.push_back(r);
    }
    if (events.empty()) throw DataError("probe: user '" + *selector.user + "' has no interactions");
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRow& a, const EventRow& b) { return a.time < b.time; });
    const std::size_t L = static_cast<std::size_t>(cfg.train.model.max_behaviors);
    const std::size_t lo = events.size() > L ? events.size() - L : 0;
    probe_sample.user = u;
    for (std::size_t i = lo; i < events.size(); ++i) {
      probe_sample.behavior_items.push_back(events[i].item);
      probe_sample.behavior_times.push_back(events[i].time);
      probe_sample.behavior_pad.push_back(false);
    }
    probe_sample.target_item = it;
    probe_sample.target_time = events.back().time;
    probe_sample.label = 1;
  } else {
    throw ConfigError("probe: need either --index or both --user and --item");
  }

  const auto sweep = probe_timestamp_sweep(params, probe_sample, horizon_hours, step_seconds);
  std::ostringstream os;
  os << "offset_hours,score\n";
  for (const auto& [off, score] : sweep) {
    os << fmt_double(off) << ',' << fmt_double(score) << '\n';
  }
  if (!out_path.empty()) {
    write_text_file(out_path, os.str());
    check_output_exists(out_path);
  } else {
    std::fputs(os.str().c_str(), stdout);
  }
  return 0;
}

}  // namespace dicycle
