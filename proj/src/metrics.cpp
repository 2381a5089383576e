#include "dicycle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace dicycle {

double auc(const std::vector<ScoredExample>& examples) {
  std::size_t positives = 0;
  for (const auto& e : examples) {
    if (e.label != 0 && e.label != 1) {
      throw DataError("auc: label must be 0 or 1, got " + std::to_string(e.label));
    }
    if (!std::isfinite(e.score)) throw DataError("auc: non-finite score");
    positives += static_cast<std::size_t>(e.label);
  }
  const std::size_t negatives = examples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc: need both classes, got " + std::to_string(positives) +
                               " positives / " + std::to_string(negatives) + " negatives");
  }
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].score < examples[b].score; });
  // average ranks over tied scores, ranks are 1-based
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && examples[idx[j]].score == examples[idx[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (examples[idx[k]].label == 1) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double gauc(const std::vector<ScoredExample>& examples) {
  std::map<std::int64_t, std::vector<ScoredExample>> by_user;
  for (const auto& e : examples) by_user[e.user_id].push_back(e);
  double weighted = 0.0;
  double weight_total = 0.0;
  for (const auto& [user, group] : by_user) {
    bool has_pos = false;
    bool has_neg = false;
    for (const auto& e : group) (e.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) continue;
    weighted += static_cast<double>(group.size()) * auc(group);
    weight_total += static_cast<double>(group.size());
  }
  if (weight_total == 0.0) {
    throw UndefinedMetricError("gauc: no user has examples of both classes");
  }
  return weighted / weight_total;
}

double logloss(const std::vector<ScoredExample>& examples, double eps) {
  if (examples.empty()) throw UndefinedMetricError("logloss: no examples");
  double total = 0.0;
  for (const auto& e : examples) {
    const double p = std::clamp(e.score, eps, 1.0 - eps);
    total -= e.label == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(examples.size());
}

double rela_impr(double target_metric, double base_metric) {
  if (base_metric == 0.5) {
    throw UndefinedMetricError("rela_impr: base metric equals the 0.5 random-guess floor");
  }
  return ((target_metric - 0.5) / (base_metric - 0.5) - 1.0) * 100.0;
}

MetricReport evaluate(const std::vector<ScoredExample>& examples) {
  MetricReport r;
  r.num_examples = examples.size();
  r.auc = auc(examples);
  r.logloss = logloss(examples);
  std::map<std::int64_t, std::vector<ScoredExample>> by_user;
  for (const auto& e : examples) by_user[e.user_id].push_back(e);
  double weighted = 0.0;
  double weight_total = 0.0;
  for (const auto& [user, group] : by_user) {
    bool has_pos = false;
    bool has_neg = false;
    for (const auto& e : group) (e.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
      ++r.skipped_users;
      continue;
    }
    weighted += static_cast<double>(group.size()) * auc(group);
    weight_total += static_cast<double>(group.size());
    ++r.num_users;
  }
  if (weight_total == 0.0) {
    throw UndefinedMetricError("gauc: no user has examples of both classes");
  }
  r.gauc = weighted / weight_total;
  return r;
}

std::string report_csv(const MetricReport& r) {
  char buf[256];
  std::ostringstream os;
  os << "metric,value\n";
  std::snprintf(buf, sizeof(buf), "auc,%.17g\n", r.auc);
  os << buf;
  std::snprintf(buf, sizeof(buf), "gauc,%.17g\n", r.gauc);
  os << buf;
  std::snprintf(buf, sizeof(buf), "logloss,%.17g\n", r.logloss);
  os << buf;
  os << "num_examples," << r.num_examples << "\n";
  os << "num_users," << r.num_users << "\n";
  os << "skipped_users," << r.skipped_users << "\n";
  return os.str();
}

}  // namespace dicycle
