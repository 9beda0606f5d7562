#include "signflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/imageio.hpp"

namespace signflow::report {

using nlohmann::json;

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string display_name(const std::string& backbone) {
  if (backbone == "mobilenet_v3") return "MobileNetV3";
  if (backbone == "resnet50") return "ResNet50";
  if (backbone == "efficientnet_b2") return "EfficientNet-B2";
  if (backbone == "tiny_cnn") return "TinyCNN";
  return backbone;
}

std::string title_phase(const std::string& phase) {
  if (phase == "validation") return "Validation";
  if (phase == "test") return "Test";
  return phase;
}

}  // namespace

std::string fold_reports_to_json(const std::vector<FoldReport>& reports) {
  json arr = json::array();
  for (const FoldReport& r : reports) {
    arr.push_back(json{{"backbone", r.backbone},
                       {"dataset", r.dataset},
                       {"fold", r.fold},
                       {"phase", r.phase},
                       {"precision", r.precision},
                       {"recall", r.recall},
                       {"f1", r.f1},
                       {"accuracy", r.accuracy},
                       {"aggregation", r.aggregation},
                       {"seed", r.seed},
                       {"config_hash", r.config_hash}});
  }
  return arr.dump(2) + "\n";
}

std::vector<FoldReport> fold_reports_from_json(const std::string& text) {
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw InconsistentReportsError("fold report file is not an array");
    std::vector<FoldReport> out;
    for (const json& j : arr) {
      FoldReport r;
      r.backbone = j.at("backbone").get<std::string>();
      r.dataset = j.at("dataset").get<std::string>();
      r.fold = j.at("fold").get<int>();
      r.phase = j.at("phase").get<std::string>();
      r.precision = j.at("precision").get<double>();
      r.recall = j.at("recall").get<double>();
      r.f1 = j.at("f1").get<double>();
      r.accuracy = j.at("accuracy").get<double>();
      r.aggregation = j.at("aggregation").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config_hash = j.at("config_hash").get<std::string>();
      out.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& e) {
    throw InconsistentReportsError(std::string("malformed fold report: ") + e.what());
  }
}

std::string fold_table(const std::vector<FoldReport>& reports) {
  if (reports.empty()) throw InconsistentReportsError("no fold reports to render");
  for (const FoldReport& r : reports) {
    if (r.backbone != reports.front().backbone || r.dataset != reports.front().dataset ||
        r.phase != reports.front().phase || r.aggregation != reports.front().aggregation)
      throw InconsistentReportsError(
          "fold table rows must share backbone, dataset, phase, and aggregation");
  }
  std::vector<FoldReport> rows = reports;
  std::sort(rows.begin(), rows.end(),
            [](const FoldReport& a, const FoldReport& b) { return a.fold < b.fold; });

  std::ostringstream out;
  out << "### " << title_phase(rows.front().phase) << " Results for "
      << display_name(rows.front().backbone) << " (" << rows.front().dataset << " Dataset)\n\n";
  out << "| Fold | Precision | Recall | F1-Score | Accuracy |\n";
  out << "|------|-----------|--------|----------|----------|\n";
  double p = 0, r = 0, f = 0, a = 0;
  for (const FoldReport& row : rows) {
    out << "| " << (row.fold + 1) << " | " << fixed6(row.precision) << " | "
        << fixed6(row.recall) << " | " << fixed6(row.f1) << " | " << fixed6(row.accuracy)
        << " |\n";
    p += row.precision;
    r += row.recall;
    f += row.f1;
    a += row.accuracy;
  }
  const double n = static_cast<double>(rows.size());
  out << "| Mean | " << fixed6(p / n) << " | " << fixed6(r / n) << " | " << fixed6(f / n)
      << " | " << fixed6(a / n) << " |\n\n";
  out << "Aggregation: " << rows.front().aggregation
      << " (one-vs-rest). Validation rows score each fold's held-out portion; test rows score "
         "the frozen 10% holdout, which no fold ever trains or validates on. All values are "
         "recomputed from serialized fold reports (best-epoch checkpoints).\n";
  return out.str();
}

double cell_shade(std::int64_t count, std::int64_t max_count) {
  if (max_count <= 0) return 0.0;
  return static_cast<double>(count) / static_cast<double>(max_count);
}

std::array<double, 3> cell_color(double shade) {
  const double s = std::clamp(shade, 0.0, 1.0);
  const std::array<double, 3> deep{13.0, 51.0, 115.0};  // dark blue at full count
  std::array<double, 3> rgb;
  for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - s) * 255.0 + s * deep[c];
  return rgb;
}

prep::ImageTensor render_confusion_image(const metrics::ConfusionMatrix& cm) {
  const int n = static_cast<int>(cm.classes.size());
  if (n == 0) throw EmptyEvaluationError();
  const int cell = 28;
  const int margin_left = 96;
  const int margin_top = 64;
  const int w = margin_left + n * cell + 8;
  const int h = margin_top + n * cell + 8;
  prep::ImageTensor img(h, w, 3, 255.0);

  std::int64_t max_count = 0;
  for (std::int64_t c : cm.counts) max_count = std::max(max_count, c);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto rgb = cell_color(cell_shade(cm.at(i, j), max_count));
      for (int y = 0; y < cell - 1; ++y) {
        for (int x = 0; x < cell - 1; ++x) {
          for (int c = 0; c < 3; ++c)
            img.at(margin_top + i * cell + y, margin_left + j * cell + x, c) = rgb[c];
        }
      }
    }
  }

  const std::array<double, 3> ink{32.0, 32.0, 32.0};
  for (int i = 0; i < n; ++i) {
    const std::string& label = cm.classes[i];
    const std::string shown = label.size() > 10 ? label.substr(0, 10) : label;
    imageio::draw_text(img, shown, 4, margin_top + i * cell + cell - 9, 0.35, ink);
    // Column headers get abbreviated to stay inside the cell width.
    const std::string abbrev = label.size() > 3 ? label.substr(0, 3) : label;
    imageio::draw_text(img, abbrev, margin_left + i * cell + 2, margin_top - 8, 0.35, ink);
  }
  imageio::draw_text(img, "predicted", margin_left, 16, 0.4, ink);
  // Count annotations stay legible only for small grids.
  if (n <= 12 && max_count > 0) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::int64_t count = cm.at(i, j);
        if (count == 0) continue;
        const auto text_ink =
            cell_shade(count, max_count) > 0.5 ? std::array<double, 3>{235.0, 235.0, 235.0} : ink;
        imageio::draw_text(img, std::to_string(count), margin_left + j * cell + 4,
                           margin_top + i * cell + cell - 10, 0.33, text_ink);
      }
    }
  }
  return img;
}

std::string percent_truncated(double fraction) {
  // Truncation, not rounding: 0.989986 renders as "98.99". The epsilon keeps
  // exact hundredths (0.99 -> "99.00") from falling one bucket short after
  // the binary representation error.
  const double basis = fraction * 10000.0 + 1e-9;
  const auto hundredths = static_cast<std::int64_t>(std::floor(basis));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld", static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

std::vector<ComparisonRow> load_baselines(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read baselines file: " + file.string());
  std::vector<ComparisonRow> rows;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "study,dataset,accuracy_percent")
        throw ConfigError("report.baselines",
                          "first row must be 'study,dataset,accuracy_percent'");
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    ComparisonRow row;
    std::string acc;
    if (!std::getline(ss, row.study, ',') || !std::getline(ss, row.dataset, ',') ||
        !std::getline(ss, acc))
      throw ConfigError("report.baselines", "malformed row at line " + std::to_string(lineno));
    try {
      row.accuracy_percent = std::stod(acc);
    } catch (const std::exception&) {
      throw ConfigError("report.baselines", "bad accuracy at line " + std::to_string(lineno));
    }
    if (row.accuracy_percent < 0.0 || row.accuracy_percent > 100.0)
      throw ConfigError("report.baselines",
                        "accuracy outside [0,100] at line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string comparison_table(const std::vector<FoldReport>& ours,
                             const std::vector<ComparisonRow>& baselines) {
  if (ours.empty()) throw InconsistentReportsError("comparison table needs our fold reports");
  // Best test fold per (backbone, dataset), recomputed here rather than read
  // from any headline figure.
  std::map<std::pair<std::string, std::string>, double> best;
  for (const FoldReport& r : ours) {
    if (r.phase != "test") continue;
    auto key = std::make_pair(r.backbone, r.dataset);
    auto it = best.find(key);
    if (it == best.end() || r.accuracy > it->second) best[key] = r.accuracy;
  }
  if (best.empty()) throw InconsistentReportsError("no test-phase fold reports to compare");

  std::ostringstream out;
  out << "### Comparison with Other Studies\n\n";
  out << "| Study | Dataset | Accuracy (%) |\n";
  out << "|-------|---------|--------------|\n";
  for (const ComparisonRow& b : baselines)
    out << "| " << b.study << " | " << b.dataset << " | " << percent_truncated(
               b.accuracy_percent / 100.0)
        << " |\n";
  for (const auto& [key, acc] : best)
    out << "| Our Approach (" << display_name(key.first) << ") | " << key.second << " | "
        << percent_truncated(acc) << "* |\n";
  out << "\n* Best fold, recomputed from serialized test-phase fold reports; never copied from "
         "headline figures. Baseline rows pass through the user-supplied baselines file "
         "unmodified.\n";
  return out.str();
}

}  // namespace signflow::report
