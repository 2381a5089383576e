#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dicycle/tensor.hpp"

namespace dicycle {

enum class GranularityKind { HourOfDay, DayOfWeek, DayOfMonth };

// Calendar granularity: maps an epoch timestamp to a slot in [0, cycle_length).
struct Granularity {
  GranularityKind kind;
  std::string name;
  Index cycle_length;
};

Granularity make_granularity(GranularityKind kind);
GranularityKind granularity_from_name(const std::string& name);

// Slot index for a timestamp, computed on UTC calendar fields shifted by a
// fixed offset. t + tz_offset must be non-negative.
Index slot_of(GranularityKind kind, std::int64_t epoch_seconds, std::int64_t tz_offset_seconds = 0);

struct TimeEncodingConfig {
  std::vector<GranularityKind> granularities = {GranularityKind::HourOfDay,
                                                GranularityKind::DayOfWeek};
  int surrounding_range = 2;       // J
  Index kernel_size = 3;           // n, odd
  bool include_j0 = false;         // prose-variant of the window sum
  double time_unit_seconds = 3600.0;
  std::int64_t tz_offset_seconds = 0;
};

// Per-granularity slot embedding tables plus one depthwise conv kernel per
// surrounding range j. Kernels are shared across granularities.
class AbsoluteTimeEncoder {
 public:
  AbsoluteTimeEncoder(TimeEncodingConfig cfg, Index d, Rng& rng);

  const TimeEncodingConfig& config() const { return cfg_; }
  Index dim() const { return d_; }
  int j_min() const { return cfg_.include_j0 ? 0 : 1; }
  int j_max() const { return cfg_.surrounding_range; }

  const std::vector<Granularity>& granularities() const { return grans_; }
  const TensorPtr& table(std::size_t g) const { return tables_[g]; }
  const TensorPtr& kernel(int j) const;

  std::vector<TensorPtr> parameters() const;
  std::vector<std::string> parameter_names() const;

 private:
  TimeEncodingConfig cfg_;
  Index d_ = 0;
  std::vector<Granularity> grans_;
  std::vector<TensorPtr> tables_;   // one per granularity, cycle_length x d
  std::vector<TensorPtr> kernels_;  // one per j in [j_min, J], n x d
};

// Rows are the embeddings of slots (slot(t) - j) .. (slot(t) + j), wrapping
// modulo the cycle length; the center row is the slot of t itself.
TensorPtr surrounding_window(const AbsoluteTimeEncoder& enc, std::size_t g_index,
                             std::int64_t t, int j);

// Eq.-style absolute encoding: sum over granularities and window ranges of
// maxpool(relu(conv(window, K_j))).
TensorPtr absolute_encode(const AbsoluteTimeEncoder& enc, std::int64_t t);

// Encoding of every slot of one granularity, stacked into cycle_length x d.
// Lets a batch share the per-slot subgraphs instead of re-deriving them per
// behavior.
TensorPtr absolute_encode_all_slots(const AbsoluteTimeEncoder& enc, std::size_t g_index);

// Trainable sinusoidal features of a (scaled) time interval:
// sqrt(2/d) * [cos(w_1 tau), sin(w_1 tau), ..., cos(w_{d/2} tau), sin(w_{d/2} tau)].
class RelativeTimeEncoder {
 public:
  RelativeTimeEncoder(TensorPtr omega, double time_unit_seconds);

  Index dim() const { return 2 * omega_->shape[0]; }
  double time_unit_seconds() const { return time_unit_seconds_; }
  const TensorPtr& omega() const { return omega_; }

 private:
  TensorPtr omega_;  // d/2 frequencies, radians per time unit
  double time_unit_seconds_ = 3600.0;
};

// Frequencies 2*pi/period with periods log-uniform between one hour and 30
// days (in time units of hours). d must be even.
TensorPtr init_frequencies(Index d, std::uint64_t seed);

TensorPtr relative_encode(const RelativeTimeEncoder& enc, double delta_seconds);
TensorPtr relative_encode_batch(const RelativeTimeEncoder& enc,
                                const std::vector<double>& delta_seconds);

}  // namespace dicycle
