#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "signflow/metrics.hpp"
#include "signflow/preprocess.hpp"

namespace signflow::report {

// One row of a per-fold results table.
struct FoldReport {
  std::string backbone;
  std::string dataset;
  int fold = -1;      // 0-based; rendered 1-based
  std::string phase;  // "validation" | "test"
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
  std::string aggregation;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct ComparisonRow {
  std::string study;
  std::string dataset;
  double accuracy_percent = 0.0;  // [0, 100]
};

std::string fold_reports_to_json(const std::vector<FoldReport>& reports);
std::vector<FoldReport> fold_reports_from_json(const std::string& text);

// Markdown table: one row per fold in fold order, six-decimal metric cells,
// then a Mean row. Reports must agree on backbone/dataset/phase/aggregation.
std::string fold_table(const std::vector<FoldReport>& reports);

// Heat shading for a confusion cell, linear in count / max_count.
double cell_shade(std::int64_t count, std::int64_t max_count);
// White at shade 0 climbing monotonically to deep blue at 1; [0,255] RGB.
std::array<double, 3> cell_color(double shade);

// C x C shaded grid with class labels. Counts are preserved exactly by the
// JSON serialization in `metrics`; this is only the figure.
prep::ImageTensor render_confusion_image(const metrics::ConfusionMatrix& cm);

// Fractional accuracy as a percent, truncated (not rounded) to 2 decimals.
std::string percent_truncated(double fraction);

// CSV with header "study,dataset,accuracy_percent"; '#' lines are comments.
std::vector<ComparisonRow> load_baselines(const std::filesystem::path& file);

// Our best-fold test accuracy per (backbone, dataset) followed by the
// passed-through baseline rows, plus the recomputation footnote.
std::string comparison_table(const std::vector<FoldReport>& ours,
                             const std::vector<ComparisonRow>& baselines);

}  // namespace signflow::report
