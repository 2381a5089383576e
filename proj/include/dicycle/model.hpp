#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dicycle/adam.hpp"
#include "dicycle/attention.hpp"
#include "dicycle/checkpoint.hpp"
#include "dicycle/data.hpp"
#include "dicycle/metrics.hpp"
#include "dicycle/tensor.hpp"
#include "dicycle/time_encoding.hpp"

namespace dicycle {

enum class ModelVariant {
  DiCycle,
  NoAbsoluteTime,
  NoRelativeTime,
  NoTimeCycleModule,
  DinStyle,
  Dnn,
  Lr,
};

ModelVariant variant_from_name(const std::string& name);
std::string variant_name(ModelVariant v);

struct ModelConfig {
  ModelVariant variant = ModelVariant::DiCycle;
  Index d = 16;
  Index max_behaviors = 50;  // L
  GatedFilterConfig gate;
  TimeEncodingConfig time;
  Index hidden1 = 128;
  Index hidden2 = 64;

  bool uses_absolute() const;
  bool uses_relative() const;
  bool uses_time_cycle_module() const;
  Index head_input_dim() const;
};

// All trainable arrays of one model instance. Each appears exactly once,
// under a unique name, in `named` (the checkpoint/optimizer order).
struct ModelParams {
  ModelConfig config;
  Index vocab = 0;  // real item count; row `vocab` of the table is the pad row

  TensorPtr item_table;                      // (vocab+1) x d
  std::optional<AbsoluteTimeEncoder> abs;
  std::optional<RelativeTimeEncoder> rel;
  std::optional<TimeCycleAttention> attn;
  TensorPtr head_w1, head_b1, head_w2, head_b2, head_w3, head_b3;
  TensorPtr lr_target_weights, lr_history_weights, lr_bias;  // LR variant only

  std::vector<NamedTensor> named;

  static ModelParams init(const ModelConfig& cfg, Index vocab, std::uint64_t seed);

  std::vector<TensorPtr> trainables() const;
  ModelParams clone() const;  // deep copy of parameter data
  void save(const std::string& path) const;
  void load(const std::string& path);
};

struct ForwardOptions {
  // Test hooks. gate_override pins the gate weights (one full-length vector
  // per sample) so finite differences see the same stop-gradient constant the
  // analytic backward uses. force_zero_phi drops the relative-time term, for
  // the structural-identity checks against NoRelativeTime.
  const std::vector<Eigen::VectorXd>* gate_override = nullptr;
  bool force_zero_phi = false;
};

struct ForwardOutput {
  TensorPtr probs;  // [batch]
  int gate_zero_norm_count = 0;
  std::vector<Eigen::VectorXd> gate_weights;  // per sample, full length
};

ForwardOutput forward(const ModelParams& params, std::span<const Sample> batch,
                      const ForwardOptions& opts = {});

// Summed cross-entropy of Eq.-style batch loss (mean is reported separately
// for logging); see bce_loss_sum for clamping.
TensorPtr loss_sum(const TensorPtr& probs, const std::vector<double>& labels);

std::vector<double> labels_of(std::span<const Sample> batch);

std::vector<ScoredExample> score_samples(const ModelParams& params, std::span<const Sample> samples,
                                         Index batch_size = 256);

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  Index batch_size = 128;
  int epochs = 10;
  int patience = 2;  // early stop on held-out logloss; <= 0 disables
  std::uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_logloss = 0.0;
  double train_auc = 0.0;
  double eval_logloss = 0.0;
  double eval_auc = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
  MetricReport test_report;
  long gate_zero_norm_total = 0;
  int best_epoch = 0;
};

TrainResult train(const TrainConfig& cfg, Index vocab, std::span<const Sample> train_samples,
                  std::span<const Sample> eval_samples);

// Scores the same (behaviors, item) pair at target_time + k*step_seconds for
// k = 0 .. horizon_hours*3600/step_seconds.
std::vector<std::pair<double, double>> probe_timestamp_sweep(const ModelParams& params,
                                                             const Sample& sample,
                                                             int horizon_hours,
                                                             std::int64_t step_seconds = 3600);

}  // namespace dicycle
