#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "signflow/manifest.hpp"
#include "signflow/preprocess.hpp"

namespace signflow::zoo {
class Model;
}

namespace signflow::metrics {

// C x C count grid; rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::int64_t> counts;  // row-major C*C

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> cls)
      : classes(std::move(cls)), counts(classes.size() * classes.size(), 0) {}

  std::int64_t& at(std::size_t true_idx, std::size_t pred_idx) {
    return counts[true_idx * classes.size() + pred_idx];
  }
  std::int64_t at(std::size_t true_idx, std::size_t pred_idx) const {
    return counts[true_idx * classes.size() + pred_idx];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

struct ClassMetrics {
  std::string class_name;
  std::int64_t tp = 0, fp = 0, fn = 0, support = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool precision_undefined = false;  // tp+fp == 0, reported as 0
  bool recall_undefined = false;     // tp+fn == 0, reported as 0
};

struct MetricBundle {
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
  std::string aggregation;  // "macro" | "weighted" | "micro"
  std::vector<ClassMetrics> per_class;
};

ConfusionMatrix confusion(const std::vector<std::string>& true_labels,
                          const std::vector<std::string>& predicted_labels,
                          const std::vector<std::string>& classes);

ConfusionMatrix confusion_from_indices(const std::vector<int>& true_idx,
                                       const std::vector<int>& pred_idx,
                                       const std::vector<std::string>& classes);

// trace / total; integer counts, one final division.
double accuracy(const ConfusionMatrix& cm);

// One-vs-rest counts per class, then the requested aggregation. Per-class F1
// is computed as 2*tp / (2*tp + fp + fn), the integer-count form of the
// harmonic mean. Zero-division convention: a class with tp+fp == 0 gets
// precision 0 (flagged), likewise recall for tp+fn == 0.
MetricBundle precision_recall_f1(const ConfusionMatrix& cm, const std::string& aggregation);

std::string confusion_to_json(const ConfusionMatrix& cm, const std::string& config_hash = "");
ConfusionMatrix confusion_from_json(const std::string& text);

struct EvalResult {
  ConfusionMatrix cm;
  MetricBundle bundle;
};

// Runs the model over every sample of a split (argmax over logits) and
// assembles confusion + metrics. A sample that fails to decode aborts the
// whole evaluation: partial test results are worse than none.
EvalResult evaluate_model(zoo::Model& model,
                          const std::vector<ingest::SampleRecord>& samples,
                          const std::filesystem::path& dataset_root,
                          const prep::PreprocessConfig& cfg,
                          const prep::NormalizationStats& stats,
                          const std::vector<std::string>& classes,
                          const std::string& aggregation, int batch_size = 16);

}  // namespace signflow::metrics
