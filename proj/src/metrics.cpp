#include "signflow/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/imageio.hpp"
#include "signflow/model_zoo.hpp"

using nlohmann::json;

namespace signflow::metrics {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) t += at(i, i);
  return t;
}

ConfusionMatrix confusion(const std::vector<std::string>& true_labels,
                          const std::vector<std::string>& predicted_labels,
                          const std::vector<std::string>& classes) {
  if (true_labels.size() != predicted_labels.size()) {
    throw LabelMismatchError("label lists differ in length: " +
                             std::to_string(true_labels.size()) + " vs " +
                             std::to_string(predicted_labels.size()));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;

  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const auto t = index.find(true_labels[i]);
    if (t == index.end()) throw UnknownClassError(true_labels[i]);
    const auto p = index.find(predicted_labels[i]);
    if (p == index.end()) throw UnknownClassError(predicted_labels[i]);
    ++cm.at(t->second, p->second);
  }
  return cm;
}

ConfusionMatrix confusion_from_indices(const std::vector<int>& true_idx,
                                       const std::vector<int>& pred_idx,
                                       const std::vector<std::string>& classes) {
  if (true_idx.size() != pred_idx.size()) {
    throw LabelMismatchError("label lists differ in length");
  }
  ConfusionMatrix cm(classes);
  const int c = static_cast<int>(classes.size());
  for (std::size_t i = 0; i < true_idx.size(); ++i) {
    if (true_idx[i] < 0 || true_idx[i] >= c) throw UnknownClassError(std::to_string(true_idx[i]));
    if (pred_idx[i] < 0 || pred_idx[i] >= c) throw UnknownClassError(std::to_string(pred_idx[i]));
    ++cm.at(static_cast<std::size_t>(true_idx[i]), static_cast<std::size_t>(pred_idx[i]));
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw EmptyEvaluationError();
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

MetricBundle precision_recall_f1(const ConfusionMatrix& cm, const std::string& aggregation) {
  if (aggregation != "macro" && aggregation != "weighted" && aggregation != "micro") {
    throw ConfigError("metrics.aggregation", "expected macro|weighted|micro, got '" + aggregation + "'");
  }
  const std::size_t c = cm.classes.size();
  const std::int64_t total = cm.total();
  if (total == 0) throw EmptyEvaluationError();

  MetricBundle out;
  out.aggregation = aggregation;
  out.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  std::vector<std::int64_t> row_sum(c, 0), col_sum(c, 0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      row_sum[i] += cm.at(i, j);
      col_sum[j] += cm.at(i, j);
    }

  std::int64_t tp_pool = 0, fp_pool = 0, fn_pool = 0;
  for (std::size_t i = 0; i < c; ++i) {
    ClassMetrics k;
    k.class_name = cm.classes[i];
    k.tp = cm.at(i, i);
    k.fp = col_sum[i] - k.tp;
    k.fn = row_sum[i] - k.tp;
    k.support = row_sum[i];
    if (k.tp + k.fp == 0) {
      k.precision = 0.0;
      k.precision_undefined = true;
    } else {
      k.precision = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
    }
    if (k.tp + k.fn == 0) {
      k.recall = 0.0;
      k.recall_undefined = true;
    } else {
      k.recall = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
    }
    const std::int64_t f1_den = 2 * k.tp + k.fp + k.fn;
    k.f1 = f1_den == 0 ? 0.0 : static_cast<double>(2 * k.tp) / static_cast<double>(f1_den);
    tp_pool += k.tp;
    fp_pool += k.fp;
    fn_pool += k.fn;
    out.per_class.push_back(k);
  }

  if (aggregation == "macro") {
    double p = 0, r = 0, f = 0;
    for (const ClassMetrics& k : out.per_class) {
      p += k.precision;
      r += k.recall;
      f += k.f1;
    }
    out.precision = p / static_cast<double>(c);
    out.recall = r / static_cast<double>(c);
    out.f1 = f / static_cast<double>(c);
  } else if (aggregation == "weighted") {
    double p = 0, r = 0, f = 0;
    for (const ClassMetrics& k : out.per_class) {
      const auto w = static_cast<double>(k.support);
      p += w * k.precision;
      r += w * k.recall;
      f += w * k.f1;
    }
    out.precision = p / static_cast<double>(total);
    out.recall = r / static_cast<double>(total);
    out.f1 = f / static_cast<double>(total);
  } else {  // micro: pooled integer counts
    out.precision = static_cast<double>(tp_pool) / static_cast<double>(tp_pool + fp_pool);
    out.recall = static_cast<double>(tp_pool) / static_cast<double>(tp_pool + fn_pool);
    out.f1 = static_cast<double>(2 * tp_pool) / static_cast<double>(2 * tp_pool + fp_pool + fn_pool);
  }
  return out;
}

std::string confusion_to_json(const ConfusionMatrix& cm, const std::string& config_hash) {
  json j;
  j["classes"] = cm.classes;
  json rows = json::array();
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < cm.classes.size(); ++k) row.push_back(cm.at(i, k));
    rows.push_back(std::move(row));
  }
  j["counts"] = std::move(rows);
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

ConfusionMatrix confusion_from_json(const std::string& text) {
  const json j = json::parse(text);
  ConfusionMatrix cm(j.at("classes").get<std::vector<std::string>>());
  const auto& rows = j.at("counts");
  for (std::size_t i = 0; i < cm.classes.size(); ++i)
    for (std::size_t k = 0; k < cm.classes.size(); ++k)
      cm.at(i, k) = rows.at(i).at(k).get<std::int64_t>();
  return cm;
}

EvalResult evaluate_model(zoo::Model& model, const std::vector<ingest::SampleRecord>& samples,
                          const std::filesystem::path& dataset_root,
                          const prep::PreprocessConfig& cfg,
                          const prep::NormalizationStats& stats,
                          const std::vector<std::string>& classes,
                          const std::string& aggregation, int batch_size) {
  if (samples.empty()) throw EmptyEvaluationError();
  model.set_train_mode(false);

  std::vector<int> truth, predicted;
  truth.reserve(samples.size());
  predicted.reserve(samples.size());

  std::vector<prep::ImageTensor> batch;
  std::vector<int> batch_truth;
  auto flush = [&] {
    if (batch.empty()) return;
    const std::vector<std::vector<double>> logits = model.forward(batch);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const auto arg = std::max_element(logits[i].begin(), logits[i].end());
      predicted.push_back(static_cast<int>(arg - logits[i].begin()));
      truth.push_back(batch_truth[i]);
    }
    batch.clear();
    batch_truth.clear();
  };

  for (const ingest::SampleRecord& s : samples) {
    prep::ImageTensor raw;
    try {
      raw = imageio::decode(dataset_root / s.path, s.channels);
    } catch (const Error& e) {
      throw EvaluationError("evaluation aborted, sample failed to load: " + s.path + " (" +
                            e.what() + ")");
    }
    batch.push_back(prep::run_pipeline(raw, cfg, &stats));
    batch_truth.push_back(s.label_index);
    if (static_cast<int>(batch.size()) == batch_size) flush();
  }
  flush();

  EvalResult result;
  result.cm = confusion_from_indices(truth, predicted, classes);
  result.bundle = precision_recall_f1(result.cm, aggregation);
  return result;
}

}  // namespace signflow::metrics
