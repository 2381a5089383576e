#include "dicycle/time_encoding.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace dicycle {

Granularity make_granularity(GranularityKind kind) {
  switch (kind) {
    case GranularityKind::HourOfDay:
      return {kind, "hour_of_day", 24};
    case GranularityKind::DayOfWeek:
      return {kind, "day_of_week", 7};
    case GranularityKind::DayOfMonth:
      return {kind, "day_of_month", 31};
  }
  throw ConfigError("unknown granularity kind");
}

GranularityKind granularity_from_name(const std::string& name) {
  if (name == "hour_of_day") return GranularityKind::HourOfDay;
  if (name == "day_of_week") return GranularityKind::DayOfWeek;
  if (name == "day_of_month") return GranularityKind::DayOfMonth;
  throw ConfigError("unknown granularity '" + name + "'");
}

Index slot_of(GranularityKind kind, std::int64_t epoch_seconds, std::int64_t tz_offset_seconds) {
  const std::int64_t t = epoch_seconds + tz_offset_seconds;
  if (t < 0) throw DataError("slot_of: timestamp before epoch: " + std::to_string(t));
  switch (kind) {
    case GranularityKind::HourOfDay:
      return static_cast<Index>((t / 3600) % 24);
    case GranularityKind::DayOfWeek:
      // epoch day 0 was a Thursday; +4 puts slot 0 on Sunday
      return static_cast<Index>((t / 86400 + 4) % 7);
    case GranularityKind::DayOfMonth: {
      using namespace std::chrono;
      const sys_days day{floor<days>(sys_seconds{seconds{t}})};
      const year_month_day ymd{day};
      return static_cast<Index>(static_cast<unsigned>(ymd.day()) - 1);
    }
  }
  throw ConfigError("unknown granularity kind");
}

AbsoluteTimeEncoder::AbsoluteTimeEncoder(TimeEncodingConfig cfg, Index d, Rng& rng)
    : cfg_(std::move(cfg)), d_(d) {
  if (d_ <= 0) throw ConfigError("absolute encoder: dimension must be positive");
  if (cfg_.kernel_size % 2 == 0 || cfg_.kernel_size < 1) {
    throw ConfigError("absolute encoder: kernel size must be odd, got " +
                      std::to_string(cfg_.kernel_size));
  }
  if (cfg_.surrounding_range < 1) {
    throw ConfigError("absolute encoder: surrounding range J must be >= 1");
  }
  if (cfg_.granularities.empty()) {
    throw ConfigError("absolute encoder: need at least one granularity");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_));
  for (GranularityKind kind : cfg_.granularities) {
    grans_.push_back(make_granularity(kind));
    tables_.push_back(Tensor::random_uniform({grans_.back().cycle_length, d_}, bound, rng, true));
  }
  for (int j = j_min(); j <= j_max(); ++j) {
    kernels_.push_back(Tensor::random_uniform({cfg_.kernel_size, d_}, bound, rng, true));
  }
}

const TensorPtr& AbsoluteTimeEncoder::kernel(int j) const {
  if (j < j_min() || j > j_max()) {
    throw ConfigError("absolute encoder: j=" + std::to_string(j) + " outside [" +
                      std::to_string(j_min()) + ", " + std::to_string(j_max()) + "]");
  }
  return kernels_[static_cast<std::size_t>(j - j_min())];
}

std::vector<TensorPtr> AbsoluteTimeEncoder::parameters() const {
  std::vector<TensorPtr> out = tables_;
  out.insert(out.end(), kernels_.begin(), kernels_.end());
  return out;
}

std::vector<std::string> AbsoluteTimeEncoder::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& g : grans_) out.push_back("abs_table_" + g.name);
  for (int j = j_min(); j <= j_max(); ++j) out.push_back("abs_kernel_j" + std::to_string(j));
  return out;
}

namespace {

std::vector<Index> window_slots(Index center, int j, Index cycle) {
  std::vector<Index> slots;
  slots.reserve(static_cast<std::size_t>(2 * j + 1));
  for (int k = -j; k <= j; ++k) {
    slots.push_back(((center + k) % cycle + cycle) % cycle);
  }
  return slots;
}

// maxpool(relu(conv(window, K_j))) for one slot of one granularity
TensorPtr slot_contribution(const AbsoluteTimeEncoder& enc, std::size_t g_index, Index slot) {
  const auto& gran = enc.granularities()[g_index];
  TensorPtr acc;
  for (int j = enc.j_min(); j <= enc.j_max(); ++j) {
    auto window = gather_rows(enc.table(g_index), window_slots(slot, j, gran.cycle_length));
    auto pooled = maxpool_over_length(relu(conv1d_depthwise(window, enc.kernel(j))));
    acc = acc ? add(acc, pooled) : pooled;
  }
  return acc;
}

}  // namespace

TensorPtr surrounding_window(const AbsoluteTimeEncoder& enc, std::size_t g_index,
                             std::int64_t t, int j) {
  if (g_index >= enc.granularities().size()) {
    throw ConfigError("surrounding_window: granularity index out of range");
  }
  if (j < enc.j_min() || j > enc.j_max()) {
    throw ConfigError("surrounding_window: j=" + std::to_string(j) + " outside [" +
                      std::to_string(enc.j_min()) + ", " + std::to_string(enc.j_max()) + "]");
  }
  const auto& gran = enc.granularities()[g_index];
  const Index slot = slot_of(gran.kind, t, enc.config().tz_offset_seconds);
  return gather_rows(enc.table(g_index), window_slots(slot, j, gran.cycle_length));
}

TensorPtr absolute_encode(const AbsoluteTimeEncoder& enc, std::int64_t t) {
  TensorPtr acc;
  for (std::size_t g = 0; g < enc.granularities().size(); ++g) {
    const Index slot = slot_of(enc.granularities()[g].kind, t, enc.config().tz_offset_seconds);
    auto contrib = slot_contribution(enc, g, slot);
    acc = acc ? add(acc, contrib) : contrib;
  }
  return acc;
}

TensorPtr absolute_encode_all_slots(const AbsoluteTimeEncoder& enc, std::size_t g_index) {
  if (g_index >= enc.granularities().size()) {
    throw ConfigError("absolute_encode_all_slots: granularity index out of range");
  }
  const Index cycle = enc.granularities()[g_index].cycle_length;
  std::vector<TensorPtr> rows;
  rows.reserve(static_cast<std::size_t>(cycle));
  for (Index s = 0; s < cycle; ++s) rows.push_back(slot_contribution(enc, g_index, s));
  return stack_rows(rows);
}

RelativeTimeEncoder::RelativeTimeEncoder(TensorPtr omega, double time_unit_seconds)
    : omega_(std::move(omega)), time_unit_seconds_(time_unit_seconds) {
  if (!omega_ || omega_->rank() != 1 || omega_->shape[0] < 1) {
    throw ConfigError("relative encoder: omega must be a non-empty rank-1 tensor");
  }
  if (time_unit_seconds_ <= 0.0) {
    throw ConfigError("relative encoder: time unit must be positive");
  }
}

TensorPtr init_frequencies(Index d, std::uint64_t seed) {
  if (d < 2 || d % 2 != 0) {
    throw ConfigError("init_frequencies: dimension must be even and >= 2, got " +
                      std::to_string(d));
  }
  const Index m = d / 2;
  // periods from 1 hour to 30 days, log-uniform, in hours
  const double lo = std::log(1.0);
  const double hi = std::log(720.0);
  Rng rng(mix_seed(seed, 0x66726571));  // frequency stream
  auto omega = Tensor::zeros({m}, true);
  for (Index i = 0; i < m; ++i) {
    const double period = std::exp(rng.uniform(lo, hi));
    omega->data[i] = 2.0 * std::numbers::pi / period;
  }
  return omega;
}

TensorPtr relative_encode_batch(const RelativeTimeEncoder& enc,
                                const std::vector<double>& delta_seconds) {
  const Index L = static_cast<Index>(delta_seconds.size());
  if (L == 0) throw DimensionError("relative_encode_batch: empty input");
  const Index m = enc.omega()->shape[0];
  auto tau = Tensor::zeros({L, 1});
  for (Index i = 0; i < L; ++i) {
    tau->data[i] = delta_seconds[static_cast<std::size_t>(i)] / enc.time_unit_seconds();
  }
  auto phase = matmul(tau, reshape(enc.omega(), {1, m}));  // L x m
  auto features = interleave_cols(cos(phase), sin(phase));
  return scale(features, std::sqrt(1.0 / static_cast<double>(m)));
}

TensorPtr relative_encode(const RelativeTimeEncoder& enc, double delta_seconds) {
  return reshape(relative_encode_batch(enc, {delta_seconds}), {enc.dim()});
}

}  // namespace dicycle
