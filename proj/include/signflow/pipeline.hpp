#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "signflow/config.hpp"
#include "signflow/report.hpp"

namespace signflow::pipeline {

// Canonical layout of one run directory. Every artifact a stage emits lives
// under these paths, so a run is fully described by its config snapshot.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config_snapshot() const { return root / "config.json"; }
  std::filesystem::path lock_file() const { return root / "run.lock"; }
  std::filesystem::path marker(const std::string& stage) const {
    return root / "markers" / (stage + ".done");
  }
  std::filesystem::path raw_manifest() const { return root / "manifests" / "raw.json"; }
  std::filesystem::path balanced_manifest() const {
    return root / "manifests" / "balanced.json";
  }
  std::filesystem::path annotated_manifest() const {
    return root / "manifests" / "annotated.json";
  }
  std::filesystem::path stats_file(int fold) const {
    return root / "stats" / ("fold_" + std::to_string(fold) + ".json");
  }
  std::filesystem::path checkpoint(int fold) const {
    return root / "checkpoints" / ("fold_" + std::to_string(fold) + ".ckpt");
  }
  std::filesystem::path checkpoint_sidecar(int fold) const {
    return root / "checkpoints" / ("fold_" + std::to_string(fold) + ".json");
  }
  std::filesystem::path epoch_log(int fold) const {
    return root / "logs" / ("fold_" + std::to_string(fold) + ".jsonl");
  }
  std::filesystem::path fold_reports() const { return root / "reports" / "fold_reports.json"; }
  std::filesystem::path confusion_json(int fold) const {
    return root / "reports" / ("confusion_fold_" + std::to_string(fold) + ".json");
  }
  std::filesystem::path validation_table() const {
    return root / "reports" / "validation_table.md";
  }
  std::filesystem::path test_table() const { return root / "reports" / "test_table.md"; }
  std::filesystem::path comparison_table() const { return root / "reports" / "comparison.md"; }
  std::filesystem::path report_index() const { return root / "reports" / "index.md"; }
  std::filesystem::path confusion_image(int fold) const {
    return root / "figures" / ("confusion_fold_" + std::to_string(fold) + ".png");
  }
  std::filesystem::path gradcam_dir() const { return root / "figures" / "gradcam"; }
};

RunPaths run_paths(const config::ExperimentConfig& cfg);

// Exclusive advisory lock on the run directory; throws IoError when another
// writer holds it. Released on destruction.
class RunLock {
 public:
  explicit RunLock(const RunPaths& paths);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path file_;
};

// Stage entry points. Each validates its upstream artifacts (config-hash
// mismatches are refused), skips itself when its completion marker already
// matches the config hash, and writes that marker on success. The caller is
// expected to hold the RunLock.
void stage_prepare(const config::ExperimentConfig& cfg);
void stage_balance(const config::ExperimentConfig& cfg);
void stage_split(const config::ExperimentConfig& cfg);
void stage_train(const config::ExperimentConfig& cfg);
void stage_evaluate(const config::ExperimentConfig& cfg);
void stage_explain(const config::ExperimentConfig& cfg);
void stage_report(const config::ExperimentConfig& cfg,
                  const std::optional<std::filesystem::path>& baselines = std::nullopt);

// Scoped evaluation of one fold (no marker, artifacts written next to the
// full ones). phase: "validation" | "test" | "both".
std::vector<report::FoldReport> evaluate_single(const config::ExperimentConfig& cfg, int fold,
                                                const std::string& phase);

// Renders tables, confusion figures and the index from an existing run
// directory into `site_dir` (reports/ and figures/ subtrees). `stage_report`
// is this with site_dir = run dir plus the completion marker.
void render_site(const config::ExperimentConfig& cfg, const std::filesystem::path& run_dir,
                 const std::filesystem::path& site_dir,
                 const std::optional<std::filesystem::path>& baselines = std::nullopt);

// All stages in order (the eight workflow steps; model saving happens inside
// the train stage).
void run(const config::ExperimentConfig& cfg,
         const std::optional<std::filesystem::path>& baselines = std::nullopt);

}  // namespace signflow::pipeline
