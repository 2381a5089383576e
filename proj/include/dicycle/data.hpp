#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dicycle/config.hpp"
#include "dicycle/rng.hpp"

namespace dicycle {

constexpr std::int64_t kPadItem = -1;

// One interned interaction record.
struct EventRow {
  std::int64_t user = 0;
  std::int64_t item = 0;
  std::int64_t time = 0;  // epoch seconds
  int label = 1;
};

struct EventLog {
  std::vector<std::string> user_names;  // dense index -> original id
  std::vector<std::string> item_names;
  std::vector<EventRow> rows;
  std::size_t rejected_rows = 0;

  std::int64_t user_index(const std::string& name) const;  // -1 if unknown
  std::int64_t item_index(const std::string& name) const;
};

// Parses a delimiter-separated log with header user_id,item_id,timestamp[,label].
// Malformed rows are counted and dropped; a missing required column is a
// schema error.
EventLog ingest(const std::string& path, char delimiter = ',');

void write_event_log(const std::string& path, const EventLog& log);

// One training/eval instance. Behavior arrays have equal length; positions
// with pad[i]==true carry the reserved item id and are ignored by the model.
struct Sample {
  std::int64_t user = 0;
  std::vector<std::int64_t> behavior_items;
  std::vector<std::int64_t> behavior_times;
  std::vector<bool> behavior_pad;
  std::int64_t target_item = 0;
  std::int64_t target_time = 0;
  int label = 0;

  std::size_t length() const { return behavior_items.size(); }
  std::size_t real_count() const;
};

// Throws DataError if the type invariants are violated (array lengths,
// non-decreasing times, times <= target, pad rows carrying the reserved id).
void validate_sample(const Sample& s);

struct SampleBuild {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::size_t excluded_users = 0;    // users with < 2 interactions
  std::size_t skipped_negatives = 0; // item universe exhausted
};

// Leave-one-out protocol: every interaction of a retained user becomes a
// positive whose behaviors are the most recent <= max_behaviors prior
// interactions; each positive gets negative_ratio negatives drawn uniformly
// from items the user never interacted with, sharing its behaviors and
// timestamp. The final interaction of each user goes to test.
SampleBuild build_samples(const EventLog& log, std::size_t max_behaviors, int negative_ratio,
                          std::uint64_t seed);

// ---- synthetic planted-cycle generator --------------------------------

struct CategoryProfile {
  std::string name;
  double item_fraction = 0.0;
  std::vector<std::pair<int, double>> atc_peaks;  // (hour of day, amplitude)
  double rtc_period_hours = 0.0;                  // 0 disables the RTC bump
  double rtc_amplitude = 0.0;
  double rtc_decay = 0.8;
  double rtc_width_hours = 2.0;

  bool has_rtc() const { return rtc_period_hours > 0.0 && rtc_amplitude > 0.0; }
};

struct SyntheticSpec {
  std::int64_t num_users = 200;
  std::int64_t num_items = 100;
  double horizon_days = 60.0;
  double base_rate_per_day = 0.15;  // per user-category pair
  std::int64_t start_epoch = 1600041600;  // a Monday, 00:00 UTC
  std::uint64_t seed = 7;
  std::vector<CategoryProfile> categories;

  static SyntheticSpec defaults();
  static SyntheticSpec from_kv(const KeyValueFile& kv);
  KeyValueFile to_kv() const;
  void validate() const;
};

// Ground-truth intensity profile, kept for diagnostics and the sidecar file.
struct SyntheticTruth {
  struct CategoryItems {
    CategoryProfile profile;
    std::int64_t item_begin = 0;  // [begin, end) item indices
    std::int64_t item_end = 0;
  };
  std::vector<CategoryItems> categories;
  double base_rate_per_day = 0.0;
  double horizon_days = 0.0;
  std::int64_t start_epoch = 0;

  // events per hour for one user of this category given the time since the
  // user's last category event (negative = no previous event)
  double intensity_per_hour(std::size_t category, std::int64_t epoch_seconds,
                            double hours_since_last) const;
  KeyValueFile to_kv() const;
};

struct SyntheticResult {
  EventLog log;
  SyntheticTruth truth;
};

// Thinned inhomogeneous Poisson process per (user, category) pair with the
// configured ATC peak bumps and RTC near-multiple-of-period bumps.
// Deterministic: per-pair streams derived from (seed, user, category).
SyntheticResult generate_synthetic(const SyntheticSpec& spec);

}  // namespace dicycle
