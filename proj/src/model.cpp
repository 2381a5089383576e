#include "dicycle/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dicycle {

ModelVariant variant_from_name(const std::string& name) {
  if (name == "DiCycle") return ModelVariant::DiCycle;
  if (name == "NoAbsoluteTime") return ModelVariant::NoAbsoluteTime;
  if (name == "NoRelativeTime") return ModelVariant::NoRelativeTime;
  if (name == "NoTimeCycleModule") return ModelVariant::NoTimeCycleModule;
  if (name == "DIN" || name == "DIN_style") return ModelVariant::DinStyle;
  if (name == "DNN") return ModelVariant::Dnn;
  if (name == "LR") return ModelVariant::Lr;
  throw ConfigError("unknown model variant '" + name + "'");
}

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::DiCycle: return "DiCycle";
    case ModelVariant::NoAbsoluteTime: return "NoAbsoluteTime";
    case ModelVariant::NoRelativeTime: return "NoRelativeTime";
    case ModelVariant::NoTimeCycleModule: return "NoTimeCycleModule";
    case ModelVariant::DinStyle: return "DIN";
    case ModelVariant::Dnn: return "DNN";
    case ModelVariant::Lr: return "LR";
  }
  throw ConfigError("unknown model variant");
}

namespace {

bool is_time_family(ModelVariant v) {
  return v == ModelVariant::DiCycle || v == ModelVariant::NoAbsoluteTime ||
         v == ModelVariant::NoRelativeTime || v == ModelVariant::NoTimeCycleModule;
}

}  // namespace

bool ModelConfig::uses_absolute() const {
  return is_time_family(variant) && variant != ModelVariant::NoAbsoluteTime;
}

bool ModelConfig::uses_relative() const {
  return is_time_family(variant) && variant != ModelVariant::NoRelativeTime;
}

bool ModelConfig::uses_time_cycle_module() const {
  return variant == ModelVariant::DiCycle || variant == ModelVariant::NoAbsoluteTime ||
         variant == ModelVariant::NoRelativeTime;
}

Index ModelConfig::head_input_dim() const {
  switch (variant) {
    case ModelVariant::DiCycle:
    case ModelVariant::NoAbsoluteTime:
    case ModelVariant::NoRelativeTime:
    case ModelVariant::Dnn:
      return 2 * d;
    case ModelVariant::NoTimeCycleModule:
    case ModelVariant::DinStyle:
      return d;
    case ModelVariant::Lr:
      return 0;
  }
  return 0;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Index vocab, std::uint64_t seed) {
  if (cfg.d < 1) throw ConfigError("model: dimension must be positive");
  if (vocab < 1) throw ConfigError("model: empty item vocabulary");
  if (cfg.max_behaviors < 1) throw ConfigError("model: max_behaviors must be >= 1");

  ModelParams p;
  p.config = cfg;
  p.vocab = vocab;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d));

  if (cfg.variant == ModelVariant::Lr) {
    Rng rng(mix_seed(seed, 1));
    p.lr_target_weights = Tensor::random_uniform({vocab + 1, 1}, 0.01, rng, true);
    p.lr_history_weights = Tensor::random_uniform({vocab + 1, 1}, 0.01, rng, true);
    p.lr_bias = Tensor::zeros({1}, true);
    p.lr_target_weights->data[vocab] = 0.0;
    p.lr_history_weights->data[vocab] = 0.0;
    p.named = {{"lr_target_weights", p.lr_target_weights},
               {"lr_history_weights", p.lr_history_weights},
               {"lr_bias", p.lr_bias}};
    return p;
  }

  Rng item_rng(mix_seed(seed, 1));
  p.item_table = Tensor::random_uniform({vocab + 1, cfg.d}, bound, item_rng, true);
  for (Index c = 0; c < cfg.d; ++c) p.item_table->data[vocab * cfg.d + c] = 0.0;  // pad row
  p.named.push_back({"item_table", p.item_table});

  if (cfg.uses_absolute()) {
    Rng abs_rng(mix_seed(seed, 2));
    p.abs.emplace(cfg.time, cfg.d, abs_rng);
    const auto params = p.abs->parameters();
    const auto names = p.abs->parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) p.named.push_back({names[i], params[i]});
  }
  if (cfg.uses_relative()) {
    p.rel.emplace(init_frequencies(cfg.d, mix_seed(seed, 3)), cfg.time.time_unit_seconds);
    p.named.push_back({"omega", p.rel->omega()});
  }
  if (cfg.uses_time_cycle_module()) {
    Rng attn_rng(mix_seed(seed, 4));
    p.attn = TimeCycleAttention::init(cfg.d, attn_rng);
    p.named.push_back({"att_wq", p.attn->wq});
    p.named.push_back({"att_wk", p.attn->wk});
    p.named.push_back({"att_wv", p.attn->wv});
  }

  Rng head_rng(mix_seed(seed, 5));
  const Index in = cfg.head_input_dim();
  auto fan_bound = [](Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  p.head_w1 = Tensor::random_uniform({in, cfg.hidden1}, fan_bound(in), head_rng, true);
  p.head_b1 = Tensor::zeros({cfg.hidden1}, true);
  p.head_w2 = Tensor::random_uniform({cfg.hidden1, cfg.hidden2}, fan_bound(cfg.hidden1), head_rng, true);
  p.head_b2 = Tensor::zeros({cfg.hidden2}, true);
  p.head_w3 = Tensor::random_uniform({cfg.hidden2, 1}, fan_bound(cfg.hidden2), head_rng, true);
  p.head_b3 = Tensor::zeros({1}, true);
  p.named.push_back({"head_w1", p.head_w1});
  p.named.push_back({"head_b1", p.head_b1});
  p.named.push_back({"head_w2", p.head_w2});
  p.named.push_back({"head_b2", p.head_b2});
  p.named.push_back({"head_w3", p.head_w3});
  p.named.push_back({"head_b3", p.head_b3});
  return p;
}

std::vector<TensorPtr> ModelParams::trainables() const {
  std::vector<TensorPtr> out;
  out.reserve(named.size());
  for (const auto& e : named) out.push_back(e.tensor);
  return out;
}

void ModelParams::save(const std::string& path) const { save_checkpoint(path, named); }

void ModelParams::load(const std::string& path) {
  auto loaded = load_checkpoint(path);
  restore_into(loaded, named);
}

std::vector<double> labels_of(std::span<const Sample> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(static_cast<double>(s.label));
  return out;
}

TensorPtr loss_sum(const TensorPtr& probs, const std::vector<double>& labels) {
  return bce_loss_sum(probs, labels);
}

namespace {

// x [in] -> W^T x + b, as [out]
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  auto y = reshape(matmul(reshape(x, {1, x->shape[0]}), w), {w->shape[1]});
  return add(y, b);
}

TensorPtr head_forward(const ModelParams& p, const TensorPtr& x) {
  auto h1 = relu(linear(x, p.head_w1, p.head_b1));
  auto h2 = relu(linear(h1, p.head_w2, p.head_b2));
  return linear(h2, p.head_w3, p.head_b3);  // [1]
}

struct SampleIndices {
  std::vector<Index> item_rows;    // pad -> vocab row
  std::vector<Index> real_rows;    // positions of unpadded entries
  std::vector<bool> valid;
  std::vector<double> deltas;      // target_time - t_k seconds, 0 on pads
  std::vector<std::vector<Index>> slots;  // per granularity, slot per position
};

SampleIndices index_sample(const ModelParams& p, const Sample& s, std::size_t batch_pos) {
  const auto& cfg = p.config;
  SampleIndices ix;
  const std::size_t l = s.length();
  ix.item_rows.reserve(l);
  ix.valid.reserve(l);
  for (std::size_t i = 0; i < l; ++i) {
    const bool pad = s.behavior_pad[i];
    ix.valid.push_back(!pad);
    if (pad) {
      ix.item_rows.push_back(p.vocab);
      continue;
    }
    const std::int64_t item = s.behavior_items[i];
    if (item < 0 || item >= p.vocab) {
      throw DataError("forward: sample " + std::to_string(batch_pos) + " (user " +
                      std::to_string(s.user) + ") has behavior item " + std::to_string(item) +
                      " outside [0, " + std::to_string(p.vocab) + ")");
    }
    ix.item_rows.push_back(static_cast<Index>(item));
    ix.real_rows.push_back(static_cast<Index>(i));
  }
  if (s.target_item < 0 || s.target_item >= p.vocab) {
    throw DataError("forward: sample " + std::to_string(batch_pos) + " (user " +
                    std::to_string(s.user) + ") has target item " + std::to_string(s.target_item) +
                    " outside [0, " + std::to_string(p.vocab) + ")");
  }
  if (cfg.uses_relative()) {
    ix.deltas.reserve(l);
    for (std::size_t i = 0; i < l; ++i) {
      ix.deltas.push_back(s.behavior_pad[i]
                              ? 0.0
                              : static_cast<double>(s.target_time - s.behavior_times[i]));
    }
  }
  if (cfg.uses_absolute()) {
    for (const auto& gran : p.abs->granularities()) {
      std::vector<Index> slots;
      slots.reserve(l);
      for (std::size_t i = 0; i < l; ++i) {
        slots.push_back(s.behavior_pad[i]
                            ? 0
                            : slot_of(gran.kind, s.behavior_times[i], cfg.time.tz_offset_seconds));
      }
      ix.slots.push_back(std::move(slots));
    }
  }
  return ix;
}

}  // namespace

ForwardOutput forward(const ModelParams& params, std::span<const Sample> batch,
                      const ForwardOptions& opts) {
  if (batch.empty()) throw DataError("forward: empty batch");
  const ModelConfig& cfg = params.config;
  const Index d = cfg.d;
  ForwardOutput out;

  if (opts.gate_override && opts.gate_override->size() != batch.size()) {
    throw ContractError("forward: gate override size does not match the batch");
  }

  // ---- LR: linear model over id weights ----
  if (cfg.variant == ModelVariant::Lr) {
    std::vector<TensorPtr> logits;
    logits.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto ix = index_sample(params, batch[b], b);
      auto logit = add(reshape(gather_rows(params.lr_target_weights,
                                           {static_cast<Index>(batch[b].target_item)}),
                               {1}),
                       params.lr_bias);
      if (!ix.real_rows.empty()) {
        std::vector<Index> rows;
        for (Index r : ix.real_rows) rows.push_back(ix.item_rows[static_cast<std::size_t>(r)]);
        auto hist = scale(sum_rows(gather_rows(params.lr_history_weights, rows)),
                          1.0 / static_cast<double>(rows.size()));
        logit = add(logit, hist);
      }
      logits.push_back(logit);
    }
    out.probs = sigmoid(concat1d(logits));
    return out;
  }

  // nodes shared by the whole batch
  std::vector<TensorPtr> slot_tables;
  if (cfg.uses_absolute()) {
    for (std::size_t g = 0; g < params.abs->granularities().size(); ++g) {
      slot_tables.push_back(absolute_encode_all_slots(*params.abs, g));
    }
  }
  const bool use_rel = cfg.uses_relative() && !opts.force_zero_phi;
  TensorPtr phi0;
  if (use_rel) phi0 = reshape(relative_encode_batch(*params.rel, {0.0}), {d});

  std::vector<TensorPtr> logits;
  logits.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Sample& s = batch[b];
    const auto ix = index_sample(params, s, b);
    const Index l = static_cast<Index>(s.length());
    const bool empty_history = ix.real_rows.empty();

    auto e_a = reshape(gather_rows(params.item_table, {static_cast<Index>(s.target_item)}), {d});
    TensorPtr e;  // l x d, absent when the history is empty
    if (l > 0) e = gather_rows(params.item_table, ix.item_rows);

    // time embeddings q_k / q_a
    TensorPtr q, q_a;
    if (is_time_family(cfg.variant)) {
      if (cfg.uses_absolute()) {
        for (std::size_t g = 0; g < slot_tables.size(); ++g) {
          if (l > 0) {
            auto lam = gather_rows(slot_tables[g], ix.slots[g]);
            q = q ? add(q, lam) : lam;
          }
          const Index target_slot = slot_of(params.abs->granularities()[g].kind, s.target_time,
                                            cfg.time.tz_offset_seconds);
          auto lam_a = reshape(gather_rows(slot_tables[g], {target_slot}), {d});
          q_a = q_a ? add(q_a, lam_a) : lam_a;
        }
      }
      if (use_rel) {
        if (l > 0) {
          auto phi = relative_encode_batch(*params.rel, ix.deltas);
          q = q ? add(q, phi) : phi;
        }
        q_a = q_a ? add(q_a, phi0) : phi0;
      }
    }

    // user interest module
    TensorPtr r_vec;
    TensorPtr r_a = q_a ? add(e_a, q_a) : e_a;
    if (cfg.variant != ModelVariant::Dnn) {
      if (empty_history) {
        r_vec = Tensor::zeros({d});
      } else {
        TensorPtr r_k = q ? add(e, q) : e;
        r_vec = interest_attention(r_a, r_k, ix.valid);
      }
    }

    // time cycle module
    TensorPtr h_vec;
    if (cfg.uses_time_cycle_module()) {
      if (empty_history || !q) {
        h_vec = Tensor::zeros({d});
        out.gate_weights.emplace_back(0);
      } else {
        Eigen::VectorXd f;
        if (opts.gate_override) {
          f = (*opts.gate_override)[b];
          if (f.size() != l) throw ContractError("forward: gate override length mismatch");
        } else {
          Eigen::MatrixXd behaviors(static_cast<Eigen::Index>(ix.real_rows.size()), d);
          for (std::size_t i = 0; i < ix.real_rows.size(); ++i) {
            const Index row = ix.item_rows[static_cast<std::size_t>(ix.real_rows[i])];
            behaviors.row(static_cast<Eigen::Index>(i)) =
                Eigen::Map<const Eigen::VectorXd>(params.item_table->data.data() + row * d, d);
          }
          Eigen::VectorXd target =
              Eigen::Map<const Eigen::VectorXd>(params.item_table->data.data() + s.target_item * d, d);
          auto gate = gated_weights(target, behaviors, cfg.gate.delta_thred);
          out.gate_zero_norm_count += gate.zero_norm_count;
          f = Eigen::VectorXd::Zero(l);
          for (std::size_t i = 0; i < ix.real_rows.size(); ++i) {
            f[ix.real_rows[i]] = gate.weights[static_cast<Eigen::Index>(i)];
          }
        }
        out.gate_weights.push_back(f);

        std::vector<bool> attend = ix.valid;
        if (cfg.gate.strict_mask) {
          for (Index i = 0; i < l; ++i) {
            if (f[i] == 0.0) attend[static_cast<std::size_t>(i)] = false;
          }
        }
        const bool any_attend =
            std::any_of(attend.begin(), attend.end(), [](bool v) { return v; });
        if (!any_attend) {
          // strict mask removed every position; all rows are zero vectors, so
          // the attention output is the zero vector
          h_vec = Tensor::zeros({d});
        } else {
          auto q_tilde = apply_filter(f, q);
          h_vec = time_cycle_attention(*params.attn, q_a, q_tilde, attend);
        }
      }
    }

    // head input per variant
    TensorPtr x;
    switch (cfg.variant) {
      case ModelVariant::DiCycle:
      case ModelVariant::NoAbsoluteTime:
      case ModelVariant::NoRelativeTime:
        x = concat1d({r_vec, h_vec});
        break;
      case ModelVariant::NoTimeCycleModule:
      case ModelVariant::DinStyle:
        x = r_vec;
        break;
      case ModelVariant::Dnn: {
        TensorPtr pooled;
        if (empty_history) {
          pooled = Tensor::zeros({d});
        } else {
          std::vector<Index> rows;
          for (Index r : ix.real_rows) rows.push_back(ix.item_rows[static_cast<std::size_t>(r)]);
          pooled = sum_rows(gather_rows(params.item_table, rows));
        }
        x = concat1d({pooled, e_a});
        break;
      }
      case ModelVariant::Lr:
        throw ContractError("forward: unreachable");
    }
    logits.push_back(head_forward(params, x));
  }
  out.probs = sigmoid(concat1d(logits));
  return out;
}

std::vector<ScoredExample> score_samples(const ModelParams& params,
                                         std::span<const Sample> samples, Index batch_size) {
  std::vector<ScoredExample> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch_size), samples.size() - start);
    auto fwd = forward(params, samples.subspan(start, n));
    for (std::size_t i = 0; i < n; ++i) {
      const Sample& s = samples[start + i];
      out.push_back({s.user, fwd.probs->data[static_cast<Index>(i)], s.label});
    }
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, Index vocab, std::span<const Sample> train_samples,
                  std::span<const Sample> eval_samples) {
  if (train_samples.empty()) throw DataError("train: empty training set");
  for (const auto& s : train_samples) validate_sample(s);
  for (const auto& s : eval_samples) validate_sample(s);

  TrainResult res;
  res.params = ModelParams::init(cfg.model, vocab, mix_seed(cfg.seed, 0x696e6974));
  auto trainables = res.params.trainables();
  AdamState opt = AdamState::init(trainables);

  std::vector<Eigen::ArrayXd> best_snapshot;
  double best_logloss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f63, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    std::vector<ScoredExample> train_scored;
    train_scored.reserve(train_samples.size());
    std::vector<Sample> batch;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n =
          std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      batch.clear();
      for (std::size_t i = 0; i < n; ++i) batch.push_back(train_samples[order[start + i]]);

      zero_grad(trainables);
      auto fwd = forward(res.params, batch);
      res.gate_zero_norm_total += fwd.gate_zero_norm_count;
      const auto labels = labels_of(batch);
      auto mean_loss = scale(loss_sum(fwd.probs, labels), 1.0 / static_cast<double>(n));
      if (!std::isfinite(mean_loss->value())) {
        throw Error("train: non-finite loss in epoch " + std::to_string(epoch));
      }
      backward(mean_loss);
      adam_step(trainables, opt, cfg.adam);

      for (std::size_t i = 0; i < n; ++i) {
        train_scored.push_back(
            {batch[i].user, fwd.probs->data[static_cast<Index>(i)], batch[i].label});
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_logloss = logloss(train_scored);
    try {
      stats.train_auc = auc(train_scored);
    } catch (const UndefinedMetricError&) {
      stats.train_auc = std::numeric_limits<double>::quiet_NaN();
    }

    if (!eval_samples.empty()) {
      const auto scored = score_samples(res.params, eval_samples, cfg.batch_size);
      stats.eval_logloss = logloss(scored);
      try {
        stats.eval_auc = auc(scored);
      } catch (const UndefinedMetricError&) {
        stats.eval_auc = std::numeric_limits<double>::quiet_NaN();
      }
      if (stats.eval_logloss < best_logloss) {
        best_logloss = stats.eval_logloss;
        res.best_epoch = epoch;
        since_best = 0;
        best_snapshot.clear();
        for (const auto& t : trainables) best_snapshot.push_back(t->data);
      } else {
        ++since_best;
      }
    }
    res.history.push_back(stats);

    if (!eval_samples.empty() && cfg.patience > 0 && since_best >= cfg.patience) break;
  }

  if (!best_snapshot.empty()) {
    for (std::size_t i = 0; i < trainables.size(); ++i) trainables[i]->data = best_snapshot[i];
  }
  if (!eval_samples.empty()) {
    res.test_report = evaluate(score_samples(res.params, eval_samples, cfg.batch_size));
  }
  return res;
}

std::vector<std::pair<double, double>> probe_timestamp_sweep(const ModelParams& params,
                                                             const Sample& sample,
                                                             int horizon_hours,
                                                             std::int64_t step_seconds) {
  if (horizon_hours < 0) throw ConfigError("probe: horizon must be >= 0");
  if (step_seconds <= 0) throw ConfigError("probe: step must be positive");
  const std::int64_t horizon_seconds = static_cast<std::int64_t>(horizon_hours) * 3600;
  const std::int64_t steps = horizon_seconds / step_seconds;
  std::vector<Sample> sweep;
  sweep.reserve(static_cast<std::size_t>(steps) + 1);
  for (std::int64_t k = 0; k <= steps; ++k) {
    Sample s = sample;
    s.target_time = sample.target_time + k * step_seconds;
    sweep.push_back(std::move(s));
  }
  const auto scored = score_samples(params, sweep);
  std::vector<std::pair<double, double>> out;
  out.reserve(scored.size());
  for (std::size_t k = 0; k < scored.size(); ++k) {
    out.emplace_back(static_cast<double>(static_cast<std::int64_t>(k) * step_seconds) / 3600.0,
                     scored[k].score);
  }
  return out;
}

}  // namespace dicycle
