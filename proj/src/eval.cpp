// SPDX-License-Identifier: Apache-2.0

#include "mivc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "mivc/data.hpp"
#include "mivc/io_util.hpp"

namespace mivc {

using nlohmann::json;

MetricsReport compute_metrics(std::span<const std::size_t> predictions,
                              std::span<const std::size_t> labels, std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw UsageError("compute_metrics: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw UsageError("compute_metrics: empty inputs");
  if (classes == 0) throw UsageError("compute_metrics: zero classes");

  std::vector<std::size_t> true_pos(classes, 0), predicted(classes, 0), support(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = labels[i];
    const std::size_t p = predictions[i];
    if (y >= classes || p >= classes) {
      throw UsageError("compute_metrics: class index outside [0, " + std::to_string(classes) + ")");
    }
    ++support[y];
    ++predicted[p];
    if (p == y) {
      ++true_pos[y];
      ++correct;
    }
  }

  MetricsReport r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  r.per_class.resize(classes);
  double p_sum = 0.0;
  double r_sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& m = r.per_class[c];
    m.support = support[c];
    m.precision = predicted[c] ? static_cast<double>(true_pos[c]) / static_cast<double>(predicted[c]) : 0.0;
    m.recall = support[c] ? static_cast<double>(true_pos[c]) / static_cast<double>(support[c]) : 0.0;
    p_sum += m.precision;
    r_sum += m.recall;
  }
  r.macro_precision = p_sum / static_cast<double>(classes);
  r.macro_recall = r_sum / static_cast<double>(classes);
  return r;
}

MetricsReport evaluate(const Model& model, std::span<const Bag> bags) {
  std::vector<std::size_t> preds, labels;
  preds.reserve(bags.size());
  labels.reserve(bags.size());
  for (const Bag& bag : bags) {
    if (!bag.label) throw DataError("bag '" + bag.id + "' has no label");
    preds.push_back(predict(model, bag));
    labels.push_back(static_cast<std::size_t>(*bag.label));
  }
  return compute_metrics(preds, labels, model.head.classes());
}

std::vector<BenchmarkRow> run_benchmark(std::span<const Bag> train_set,
                                        std::span<const Bag> eval_set,
                                        const std::vector<Strategy>& strategies,
                                        const TrainConfig& base) {
  if (strategies.empty()) throw UsageError("benchmark needs at least one strategy");
  if (eval_set.empty()) throw DataError("benchmark eval split is empty");
  std::vector<BenchmarkRow> rows;
  for (Strategy s : strategies) {
    TrainConfig config = base;
    config.strategy = s;
    BenchmarkRow row;
    row.strategy = s;
    row.trained = train(config, train_set);
    row.metrics = evaluate(row.trained.model, eval_set);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string benchmark_table(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %10s %16s %13s\n", "strategy", "accuracy",
                "macro_precision", "macro_recall");
  os << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-14s %10.4f %16.4f %13.4f\n",
                  std::string(to_string(row.strategy)).c_str(), row.metrics.accuracy,
                  row.metrics.macro_precision, row.metrics.macro_recall);
    os << line;
  }
  return os.str();
}

std::string benchmark_jsonl(const std::vector<BenchmarkRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    json j = json::object();
    j["strategy"] = std::string(to_string(row.strategy));
    j["accuracy"] = row.metrics.accuracy;
    j["macro_precision"] = row.metrics.macro_precision;
    j["macro_recall"] = row.metrics.macro_recall;
    out += j.dump() + "\n";
  }
  return out;
}

std::string metrics_json(const MetricsReport& report) {
  json per_class = json::array();
  for (const auto& c : report.per_class) {
    per_class.push_back({{"precision", c.precision}, {"recall", c.recall}, {"support", c.support}});
  }
  json j = {{"accuracy", report.accuracy},
            {"macro_precision", report.macro_precision},
            {"macro_recall", report.macro_recall},
            {"per_class", per_class}};
  return j.dump(2) + "\n";
}

std::size_t AttentionReport::argmax() const {
  return static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) -
                                  weights.begin());
}

std::vector<AttentionReport> attention_reports(const Model& model, std::span<const Bag> bags) {
  const auto kind = pooling_kind_of(model.strategy);
  if (!kind || !is_attention(*kind)) {
    throw UsageError("attention export needs an attn or gated model, got " +
                     std::string(to_string(model.strategy)));
  }
  std::vector<AttentionReport> reports;
  reports.reserve(bags.size());
  for (const Bag& bag : bags) {
    const ForwardResult fr = forward(model, bag);
    reports.push_back({bag.id, *kind, fr.pooled.alpha->values()});
  }
  return reports;
}

std::string attention_jsonl(const std::vector<AttentionReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    json weights = json::array();
    json indices = json::array();
    for (std::size_t i = 0; i < r.weights.size(); ++i) {
      weights.push_back(std::round(r.weights[i] * 1e4) / 1e4);
      indices.push_back(i);
    }
    json j = json::object();
    j["bag_id"] = r.bag_id;
    j["kind"] = std::string(to_string(r.kind));
    j["instances"] = indices;
    j["weights"] = weights;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AttentionReport> export_attention(const Model& model, std::span<const Bag> bags,
                                              const std::filesystem::path& out) {
  auto reports = attention_reports(model, bags);
  io::write_file_atomic(out, attention_jsonl(reports));
  return reports;
}

double witness_hit_rate(const std::vector<AttentionReport>& reports, std::span<const Bag> bags) {
  if (reports.size() != bags.size()) throw UsageError("witness_hit_rate: size mismatch");
  std::size_t eligible = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const auto witnesses = witnesses_of(bags[i]);
    if (witnesses.empty()) continue;
    ++eligible;
    if (std::find(witnesses.begin(), witnesses.end(), reports[i].argmax()) != witnesses.end()) {
      ++hits;
    }
  }
  if (eligible == 0) throw DataError("no bag lists witness instances");
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

}  // namespace mivc
