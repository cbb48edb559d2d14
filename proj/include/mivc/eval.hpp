// SPDX-License-Identifier: Apache-2.0
//
// Classification metrics, the strategy benchmark, and attention-weight
// export for interpretability.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mivc/model.hpp"

namespace mivc {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::vector<ClassMetrics> per_class;
};

/// Macro averages are unweighted over all `classes`; a class with no
/// predictions has precision 0 and a class with no support has recall 0.
MetricsReport compute_metrics(std::span<const std::size_t> predictions,
                              std::span<const std::size_t> labels, std::size_t classes);

MetricsReport evaluate(const Model& model, std::span<const Bag> bags);

struct BenchmarkRow {
  Strategy strategy = Strategy::kAttn;
  MetricsReport metrics;
  TrainResult trained;
};

/// Trains each strategy from `base` (same seed for all) on `train_set` and
/// evaluates on `eval_set`. Rows follow `strategies` order.
std::vector<BenchmarkRow> run_benchmark(std::span<const Bag> train_set,
                                        std::span<const Bag> eval_set,
                                        const std::vector<Strategy>& strategies,
                                        const TrainConfig& base);

/// Columns: strategy, accuracy, macro_precision, macro_recall.
std::string benchmark_table(const std::vector<BenchmarkRow>& rows);
std::string benchmark_jsonl(const std::vector<BenchmarkRow>& rows);
std::string metrics_json(const MetricsReport& report);

struct AttentionReport {
  std::string bag_id;
  PoolingKind kind = PoolingKind::kAttn;
  std::vector<double> weights;  // full precision

  std::size_t argmax() const;
};

/// Throws UsageError unless the model pools with attn or gated.
std::vector<AttentionReport> attention_reports(const Model& model, std::span<const Bag> bags);
/// One JSON object per line, weights rounded to 4 decimals.
std::string attention_jsonl(const std::vector<AttentionReport>& reports);
std::vector<AttentionReport> export_attention(const Model& model, std::span<const Bag> bags,
                                              const std::filesystem::path& out);

/// Fraction of bags (among those listing witnesses) whose largest attention
/// weight falls on a witness instance.
double witness_hit_rate(const std::vector<AttentionReport>& reports, std::span<const Bag> bags);

}  // namespace mivc
