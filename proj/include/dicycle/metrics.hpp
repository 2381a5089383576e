#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dicycle/errors.hpp"

namespace dicycle {

struct ScoredExample {
  std::int64_t user_id = 0;
  double score = 0.0;
  int label = 0;  // 0 or 1
};

struct MetricReport {
  double auc = 0.0;
  double gauc = 0.0;
  double logloss = 0.0;  // mean per example
  std::size_t num_examples = 0;
  std::size_t num_users = 0;        // users contributing to gauc
  std::size_t skipped_users = 0;    // single-class users excluded from gauc
};

// Mann-Whitney AUC with average ranks on ties, O(N log N).
// Throws UndefinedMetricError unless both classes are present.
double auc(const std::vector<ScoredExample>& examples);

// Per-user AUC weighted by the user's example count. Users whose examples
// are single-class are excluded from numerator and denominator.
double gauc(const std::vector<ScoredExample>& examples);

// Mean binary cross-entropy, scores clamped to [eps, 1-eps].
double logloss(const std::vector<ScoredExample>& examples, double eps = 1e-12);

// ((target - 0.5) / (base - 0.5) - 1) * 100, in percent.
double rela_impr(double target_metric, double base_metric);

MetricReport evaluate(const std::vector<ScoredExample>& examples);

std::string report_csv(const MetricReport& r);

}  // namespace dicycle
