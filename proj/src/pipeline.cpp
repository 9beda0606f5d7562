#include "signflow/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "signflow/balance.hpp"
#include "signflow/errors.hpp"
#include "signflow/gradcam.hpp"
#include "signflow/imageio.hpp"
#include "signflow/log.hpp"
#include "signflow/metrics.hpp"
#include "signflow/model_zoo.hpp"
#include "signflow/rng.hpp"
#include "signflow/split.hpp"
#include "signflow/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace signflow::pipeline {

RunPaths run_paths(const config::ExperimentConfig& cfg) { return RunPaths{cfg.output.dir}; }

RunLock::RunLock(const RunPaths& paths) : file_(paths.lock_file()) {
  fs::create_directories(paths.root);
  std::error_code ec;
  if (fs::exists(file_))
    throw IoError("run directory is locked by another writer: " + file_.string() +
                  " (remove the file if that writer is gone)");
  std::ofstream out(file_);
  if (!out) throw IoError("cannot create lock file: " + file_.string());
  out << "locked\n";
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

namespace {

void ensure_layout(const RunPaths& paths) {
  for (const char* sub : {"manifests", "stats", "checkpoints", "logs", "reports", "figures",
                          "markers"})
    fs::create_directories(paths.root / sub);
  fs::create_directories(paths.gradcam_dir());
}

// Writes the snapshot on first use; afterwards any stage invoked with a
// different config (hash over everything but the output section) is refused.
void snapshot_config(const config::ExperimentConfig& cfg, const RunPaths& paths,
                     const std::string& hash) {
  const fs::path snap = paths.config_snapshot();
  if (!fs::exists(snap)) {
    std::ofstream out(snap);
    if (!out) throw IoError("cannot write config snapshot: " + snap.string());
    out << config::to_canonical_json(cfg);
    return;
  }
  std::ifstream in(snap);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string existing = config::config_hash(config::parse_config(buf.str()));
  if (existing != hash)
    throw ConfigHashMismatchError("run directory " + paths.root.string() +
                                  " belongs to config " + existing + ", current config is " +
                                  hash);
}

bool stage_done(const RunPaths& paths, const std::string& stage, const std::string& hash) {
  const fs::path marker = paths.marker(stage);
  if (!fs::exists(marker)) return false;
  std::ifstream in(marker);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string recorded;
  try {
    recorded = json::parse(buf.str()).at("config_hash").get<std::string>();
  } catch (const json::exception&) {
    return false;  // corrupt marker: redo the stage
  }
  if (recorded != hash)
    throw ConfigHashMismatchError("stage '" + stage + "' was completed under config " +
                                  recorded + ", current config is " + hash);
  log::info("stage '" + stage + "' already complete, skipping");
  return true;
}

void mark_done(const RunPaths& paths, const std::string& stage, const std::string& hash) {
  std::ofstream out(paths.marker(stage));
  if (!out) throw IoError("cannot write stage marker: " + paths.marker(stage).string());
  out << json{{"stage", stage}, {"config_hash", hash}}.dump(2) << "\n";
}

void need(const fs::path& file) {
  if (!fs::exists(file)) throw StageDependencyError(file.string());
}

ingest::DatasetManifest load_checked_manifest(const fs::path& file, const std::string& hash) {
  need(file);
  ingest::DatasetManifest m = ingest::load_manifest(file);
  if (!m.config_hash.empty() && m.config_hash != hash)
    throw ConfigHashMismatchError("manifest " + file.string() + " was produced by config " +
                                  m.config_hash + ", current config is " + hash);
  return m;
}

prep::PreprocessConfig preprocess_config(const config::ExperimentConfig& cfg) {
  prep::PreprocessConfig pc;
  pc.channel_policy = cfg.dataset.channel_policy;
  pc.augmentation = cfg.preprocess.augmentation;
  return pc;
}

zoo::BackboneSpec backbone_spec(const config::ExperimentConfig& cfg, int num_classes) {
  zoo::BackboneSpec spec;
  spec.name = cfg.model.backbone;
  spec.num_classes = num_classes;
  spec.pretrained = cfg.model.pretrained;
  spec.feature_layer_id = cfg.model.feature_layer;
  return spec;
}

zoo::ZooOptions zoo_options(std::uint64_t seed) {
  zoo::ZooOptions opts;
  opts.seed = seed;
  if (const char* dir = std::getenv("SIGNFLOW_BACKBONE_DIR"); dir && *dir)
    opts.backbone_dir = dir;
  return opts;
}

void save_stats(const fs::path& file, const prep::NormalizationStats& stats,
                const std::string& hash) {
  json doc{{"mean", stats.mean},
           {"stddev", stats.stddev},
           {"source_split", stats.source_split},
           {"sample_count", stats.sample_count},
           {"config_hash", hash}};
  std::ofstream out(file);
  if (!out) throw IoError("cannot write stats: " + file.string());
  out << doc.dump(2) << "\n";
}

prep::NormalizationStats load_stats(const fs::path& file, const std::string& hash) {
  need(file);
  std::ifstream in(file);
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw IoError("malformed stats file " + file.string() + ": " + e.what());
  }
  const std::string recorded = doc.value("config_hash", "");
  if (!recorded.empty() && recorded != hash)
    throw ConfigHashMismatchError("stats " + file.string() + " were produced by config " +
                                  recorded + ", current config is " + hash);
  prep::NormalizationStats stats;
  doc.at("mean").get_to(stats.mean);
  doc.at("stddev").get_to(stats.stddev);
  stats.source_split = doc.at("source_split").get<std::string>();
  stats.sample_count = doc.at("sample_count").get<std::int64_t>();
  return stats;
}

json load_sidecar(const fs::path& file, const std::string& hash) {
  need(file);
  std::ifstream in(file);
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint sidecar " + file.string() + ": " + e.what());
  }
  const std::string recorded = doc.value("config_hash", "");
  if (recorded != hash)
    throw ConfigHashMismatchError("checkpoint " + file.string() + " was produced by config " +
                                  recorded + ", current config is " + hash);
  return doc;
}

// Per-fold standardizing loader; augmentations (when configured) apply only
// to the fold's training samples, never to its validation ones.
train::Loader make_loader(const std::string& root, const prep::PreprocessConfig& pre,
                          prep::NormalizationStats stats, int fold,
                          std::vector<std::string> augmentation, std::uint64_t aug_seed) {
  auto rng = std::make_shared<Rng>(aug_seed);
  return [root, pre, stats = std::move(stats), fold, augmentation = std::move(augmentation),
          rng](const ingest::SampleRecord& s) {
    prep::ImageTensor raw = imageio::decode(fs::path(root) / s.path, s.channels);
    if (!augmentation.empty() && s.fold >= 0 && s.fold != fold)
      raw = prep::apply_augmentations(raw, augmentation, *rng);
    return prep::run_pipeline(raw, pre, &stats);
  };
}

struct FoldArtifacts {
  std::unique_ptr<zoo::Model> model;
  prep::NormalizationStats stats;
};

// Rebuilds the model skeleton for a fold and loads its trained weights.
FoldArtifacts load_fold_model(const config::ExperimentConfig& cfg, const RunPaths& paths,
                              const std::string& hash, int fold, int num_classes) {
  const json sidecar = load_sidecar(paths.checkpoint_sidecar(fold), hash);
  if (sidecar.at("backbone").get<std::string>() != cfg.model.backbone)
    throw ConfigHashMismatchError("checkpoint backbone mismatch for fold " +
                                  std::to_string(fold));
  need(paths.checkpoint(fold));
  FoldArtifacts art;
  art.model = zoo::build_model(
      backbone_spec(cfg, num_classes),
      zoo_options(derive_seed(cfg.split.seed, "init/fold" + std::to_string(fold))));
  art.model->load_weights_file(paths.checkpoint(fold));
  art.stats = load_stats(paths.stats_file(fold), hash);
  return art;
}

report::FoldReport make_report(const config::ExperimentConfig& cfg, const std::string& hash,
                               int fold, const std::string& phase,
                               const metrics::EvalResult& eval) {
  report::FoldReport row;
  row.backbone = cfg.model.backbone;
  row.dataset = cfg.dataset.name;
  row.fold = fold;
  row.phase = phase;
  row.precision = eval.bundle.precision;
  row.recall = eval.bundle.recall;
  row.f1 = eval.bundle.f1;
  row.accuracy = eval.bundle.accuracy;
  row.aggregation = eval.bundle.aggregation;
  row.seed = cfg.split.seed;
  row.config_hash = hash;
  return row;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void stage_prepare(const config::ExperimentConfig& cfg) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "prepare", hash)) return;

  ingest::DatasetManifest m = ingest::build_manifest(cfg.dataset.root, cfg.dataset.name);
  m.config_hash = hash;
  ingest::save_manifest(m, paths.raw_manifest());
  const ingest::ClassDistribution dist = ingest::class_distribution(m);
  log::info("prepared " + std::to_string(m.samples.size()) + " samples across " +
            std::to_string(m.classes.size()) + " classes (imbalance " +
            std::to_string(dist.imbalance_ratio) + ")");
  mark_done(paths, "prepare", hash);
}

void stage_balance(const config::ExperimentConfig& cfg) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "balance", hash)) return;

  const ingest::DatasetManifest raw = load_checked_manifest(paths.raw_manifest(), hash);
  balance::BalancePolicy policy;
  policy.cap = cfg.dataset.cap;
  policy.seed = derive_seed(cfg.split.seed, "balance");
  ingest::DatasetManifest balanced = balance::undersample(raw, policy);
  balanced.config_hash = hash;
  ingest::save_manifest(balanced, paths.balanced_manifest());
  log::info("balanced manifest: " + std::to_string(balanced.samples.size()) + " of " +
            std::to_string(raw.samples.size()) + " samples retained (cap " +
            std::to_string(cfg.dataset.cap) + ")");
  mark_done(paths, "balance", hash);
}

void stage_split(const config::ExperimentConfig& cfg) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "split", hash)) return;

  const ingest::DatasetManifest balanced =
      load_checked_manifest(paths.balanced_manifest(), hash);
  const split::SplitAssignment holdout =
      split::stratified_holdout(balanced, derive_seed(cfg.split.seed, "split"),
                                cfg.split.ratios);
  const split::FoldAssignment folds =
      split::stratified_kfold(balanced, holdout, cfg.split.k,
                              derive_seed(cfg.split.seed, "kfold"));
  ingest::DatasetManifest annotated = split::annotate(balanced, holdout, folds);
  annotated.seed = cfg.split.seed;
  annotated.config_hash = hash;
  ingest::save_manifest(annotated, paths.annotated_manifest());
  mark_done(paths, "split", hash);
}

void stage_train(const config::ExperimentConfig& cfg) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "train", hash)) return;

  const ingest::DatasetManifest m = load_checked_manifest(paths.annotated_manifest(), hash);
  const int num_classes = static_cast<int>(m.classes.size());
  const prep::PreprocessConfig pre = preprocess_config(cfg);
  const std::uint64_t seed = cfg.split.seed;

  train::ModelFactory model_factory = [&](int fold) {
    return zoo::build_model(backbone_spec(cfg, num_classes),
                            zoo_options(derive_seed(seed, "init/fold" + std::to_string(fold))));
  };

  train::LoaderFactory loader_factory =
      [&](int fold, const std::vector<ingest::SampleRecord>& train_set) {
        prep::StatsAccumulator acc;
        prep::PreprocessConfig fit = pre;
        fit.augmentation.clear();  // stats come from the clean stream
        for (const ingest::SampleRecord& s : train_set) {
          const prep::ImageTensor raw = imageio::decode(fs::path(m.root) / s.path, s.channels);
          acc.add(prep::run_pipeline(raw, fit, nullptr));
        }
        const prep::NormalizationStats stats = acc.finalize();
        save_stats(paths.stats_file(fold), stats, hash);
        return make_loader(m.root, pre, stats, fold, cfg.preprocess.augmentation,
                           derive_seed(seed, "augment/fold" + std::to_string(fold)));
      };

  train::FoldSink sink = [&](int fold, zoo::Model& model, train::TrainedFold& trained) {
    model.save_weights_file(paths.checkpoint(fold));
    trained.checkpoint = fs::relative(paths.checkpoint(fold), paths.root).generic_string();
    trained.stats_file = fs::relative(paths.stats_file(fold), paths.root).generic_string();
    train::write_epoch_log(paths.epoch_log(fold), trained, hash);
    train::write_checkpoint_sidecar(paths.checkpoint_sidecar(fold), model.spec(), trained,
                                    seed, hash);
  };

  const std::vector<train::FoldOutcome> outcomes =
      train::run_cv(m, cfg.split.k, model_factory, loader_factory, cfg.train,
                    derive_seed(seed, "train"), sink);

  std::string failures;
  for (const train::FoldOutcome& o : outcomes)
    if (!o.ok) failures += (failures.empty() ? "" : "; ") + o.error;
  if (!failures.empty()) throw Error("training incomplete: " + failures);
  mark_done(paths, "train", hash);
}

namespace {

std::vector<report::FoldReport> evaluate_fold_rows(const config::ExperimentConfig& cfg,
                                                   const RunPaths& paths,
                                                   const std::string& hash,
                                                   const ingest::DatasetManifest& m, int fold,
                                                   bool do_validation, bool do_test,
                                                   bool save_confusion) {
  FoldArtifacts art = load_fold_model(cfg, paths, hash, fold,
                                      static_cast<int>(m.classes.size()));
  const prep::PreprocessConfig pre = preprocess_config(cfg);
  std::vector<report::FoldReport> rows;
  if (do_validation) {
    const split::FoldSets sets = split::fold_sets(m, fold);
    const metrics::EvalResult val =
        metrics::evaluate_model(*art.model, sets.val, m.root, pre, art.stats, m.classes,
                                cfg.metrics.aggregation, cfg.train.batch_size);
    rows.push_back(make_report(cfg, hash, fold, "validation", val));
  }
  if (do_test) {
    const metrics::EvalResult test =
        metrics::evaluate_model(*art.model, split::test_samples(m), m.root, pre, art.stats,
                                m.classes, cfg.metrics.aggregation, cfg.train.batch_size);
    rows.push_back(make_report(cfg, hash, fold, "test", test));
    if (save_confusion)
      write_text(paths.confusion_json(fold), metrics::confusion_to_json(test.cm, hash));
  }
  return rows;
}

}  // namespace

void stage_evaluate(const config::ExperimentConfig& cfg) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "evaluate", hash)) return;

  const ingest::DatasetManifest m = load_checked_manifest(paths.annotated_manifest(), hash);
  std::vector<report::FoldReport> rows;
  for (int fold = 0; fold < cfg.split.k; ++fold) {
    auto fold_rows = evaluate_fold_rows(cfg, paths, hash, m, fold, true, true, true);
    rows.insert(rows.end(), fold_rows.begin(), fold_rows.end());
  }
  write_text(paths.fold_reports(), report::fold_reports_to_json(rows));
  mark_done(paths, "evaluate", hash);
}

std::vector<report::FoldReport> evaluate_single(const config::ExperimentConfig& cfg, int fold,
                                                const std::string& phase) {
  if (fold < 0 || fold >= cfg.split.k)
    throw ConfigError("split.k", "fold index " + std::to_string(fold) + " outside 0.." +
                                     std::to_string(cfg.split.k - 1));
  if (phase != "validation" && phase != "test" && phase != "both")
    throw ConfigError("explain.phase", "phase must be validation|test|both");
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  const ingest::DatasetManifest m = load_checked_manifest(paths.annotated_manifest(), hash);
  return evaluate_fold_rows(cfg, paths, hash, m, fold, phase != "test", phase != "validation",
                            false);
}

void stage_explain(const config::ExperimentConfig& cfg) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "explain", hash)) return;

  need(paths.fold_reports());
  const std::vector<report::FoldReport> rows =
      report::fold_reports_from_json(read_text(paths.fold_reports()));
  int best_fold = -1;
  double best_acc = -1.0;
  for (const report::FoldReport& r : rows) {
    if (r.phase == "test" && r.accuracy > best_acc) {
      best_acc = r.accuracy;
      best_fold = r.fold;
    }
  }
  if (best_fold < 0) throw StageDependencyError(paths.fold_reports().string());

  const ingest::DatasetManifest m = load_checked_manifest(paths.annotated_manifest(), hash);
  FoldArtifacts art = load_fold_model(cfg, paths, hash, best_fold,
                                      static_cast<int>(m.classes.size()));
  const prep::PreprocessConfig pre = preprocess_config(cfg);

  // Deterministic sample choice: rotate over classes in sorted-path order so
  // the gallery is not a single class.
  std::map<std::string, std::vector<ingest::SampleRecord>> by_class;
  for (const ingest::SampleRecord& s : split::test_samples(m)) by_class[s.label].push_back(s);
  for (auto& [cls, list] : by_class)
    std::sort(list.begin(), list.end(),
              [](const auto& a, const auto& b) { return a.path < b.path; });
  std::vector<ingest::SampleRecord> chosen;
  for (std::size_t round = 0; static_cast<int>(chosen.size()) < cfg.explain.samples; ++round) {
    bool any = false;
    for (auto& [cls, list] : by_class) {
      if (round < list.size() && static_cast<int>(chosen.size()) < cfg.explain.samples) {
        chosen.push_back(list[round]);
        any = true;
      }
    }
    if (!any) break;  // fewer test images than requested
  }

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const ingest::SampleRecord& s = chosen[i];
    const prep::ImageTensor raw = imageio::decode(fs::path(m.root) / s.path, s.channels);
    const prep::ImageTensor input = prep::run_pipeline(raw, pre, &art.stats);
    const gradcam::CamResult cam =
        gradcam::explain(*art.model, input, std::nullopt, cfg.explain.layer);

    const std::string stem =
        "fold" + std::to_string(best_fold) + "_sample" + std::to_string(i);
    prep::ImageTensor cam_gray = nn::to_hwc(cam.upsampled);
    for (double& v : cam_gray.data) v *= 255.0;
    imageio::encode(cam_gray, paths.gradcam_dir() / (stem + "_cam.png"));
    const prep::ImageTensor blended = gradcam::overlay(raw, cam, cfg.explain.opacity);
    imageio::encode(blended, paths.gradcam_dir() / (stem + "_overlay.png"));
    write_text(paths.gradcam_dir() / (stem + "_provenance.json"),
               gradcam::provenance_json(cam, cfg.explain.opacity, hash, s.path, s.label));
  }
  log::info("explained " + std::to_string(chosen.size()) + " test images from fold " +
            std::to_string(best_fold));
  mark_done(paths, "explain", hash);
}

void render_site(const config::ExperimentConfig& cfg, const std::filesystem::path& run_dir,
                 const std::filesystem::path& site_dir,
                 const std::optional<std::filesystem::path>& baselines) {
  const RunPaths src{run_dir};
  const RunPaths dst{site_dir};
  const std::string hash = config::config_hash(cfg);
  fs::create_directories(site_dir / "reports");
  fs::create_directories(site_dir / "figures");

  const std::vector<report::FoldReport> rows =
      report::fold_reports_from_json(read_text(src.fold_reports()));
  for (const report::FoldReport& r : rows)
    if (r.config_hash != hash)
      throw ConfigHashMismatchError("fold reports were produced by config " + r.config_hash +
                                    ", current config is " + hash);

  std::vector<report::FoldReport> validation, test;
  for (const report::FoldReport& r : rows)
    (r.phase == "validation" ? validation : test).push_back(r);
  if (!validation.empty())
    write_text(dst.validation_table(), report::fold_table(validation));
  if (!test.empty()) write_text(dst.test_table(), report::fold_table(test));

  std::vector<report::ComparisonRow> baseline_rows;
  if (baselines) baseline_rows = report::load_baselines(*baselines);
  write_text(dst.comparison_table(), report::comparison_table(rows, baseline_rows));

  std::string index = "# Run artifacts\n\n";
  for (int fold = 0; fold < cfg.split.k; ++fold) {
    if (!fs::exists(src.confusion_json(fold))) continue;
    const metrics::ConfusionMatrix cm =
        metrics::confusion_from_json(read_text(src.confusion_json(fold)));
    imageio::encode(report::render_confusion_image(cm), dst.confusion_image(fold));
    index += "- figures/confusion_fold_" + std::to_string(fold) + ".png (test set, fold " +
             std::to_string(fold + 1) + ")\n";
  }
  index += "- reports/validation_table.md\n- reports/test_table.md\n- reports/comparison.md\n";
  if (fs::exists(src.gradcam_dir())) {
    std::vector<std::string> gallery;
    for (const auto& entry : fs::directory_iterator(src.gradcam_dir()))
      gallery.push_back(entry.path().filename().string());
    std::sort(gallery.begin(), gallery.end());
    if (!fs::equivalent(run_dir, site_dir)) {
      fs::create_directories(dst.gradcam_dir());
      for (const std::string& name : gallery)
        fs::copy_file(src.gradcam_dir() / name, dst.gradcam_dir() / name,
                      fs::copy_options::overwrite_existing);
    }
    for (const std::string& name : gallery) index += "- figures/gradcam/" + name + "\n";
  }
  index += "\nconfig_hash: " + hash + "\n";
  write_text(dst.report_index(), index);
}

void stage_report(const config::ExperimentConfig& cfg,
                  const std::optional<std::filesystem::path>& baselines) {
  const RunPaths paths = run_paths(cfg);
  const std::string hash = config::config_hash(cfg);
  ensure_layout(paths);
  snapshot_config(cfg, paths, hash);
  if (stage_done(paths, "report", hash)) return;
  need(paths.fold_reports());
  render_site(cfg, paths.root, paths.root, baselines);
  mark_done(paths, "report", hash);
}

void run(const config::ExperimentConfig& cfg,
         const std::optional<std::filesystem::path>& baselines) {
  stage_prepare(cfg);
  stage_balance(cfg);
  stage_split(cfg);
  stage_train(cfg);
  stage_evaluate(cfg);
  stage_explain(cfg);
  stage_report(cfg, baselines);
}

}  // namespace signflow::pipeline
