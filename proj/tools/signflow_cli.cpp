// signflow: prepare | balance | split | train | evaluate | explain | report | run
//
// Stage subcommands share a JSON config (--config) and a run directory; every
// artifact embeds the config hash and downstream stages refuse mismatches.
// `balance`, `explain` and `report` additionally offer file-level modes that
// work on explicit paths instead of a run directory.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "signflow/balance.hpp"
#include "signflow/config.hpp"
#include "signflow/errors.hpp"
#include "signflow/gradcam.hpp"
#include "signflow/imageio.hpp"
#include "signflow/log.hpp"
#include "signflow/manifest.hpp"
#include "signflow/model_zoo.hpp"
#include "signflow/pipeline.hpp"
#include "signflow/report.hpp"
#include "signflow/synthetic.hpp"

namespace fs = std::filesystem;
using namespace signflow;

namespace {

config::ExperimentConfig load_cfg(const std::string& file) {
  if (!fs::exists(file)) throw IoError("config file not found: " + file);
  return config::load_config(file);
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

// File-level balance: manifest in, undersampled manifest out. The seed is
// used directly (no config to derive from).
void balance_files(const std::string& in, const std::string& out, std::int64_t cap,
                   std::uint64_t seed) {
  const ingest::DatasetManifest m = ingest::load_manifest(in);
  balance::BalancePolicy policy;
  policy.cap = cap;
  policy.seed = seed;
  ingest::save_manifest(balance::undersample(m, policy), out);
}

// File-level explain: rebuild the model from a checkpoint + its sidecar and
// emit cam/overlay/provenance for one image.
void explain_files(const std::string& checkpoint, const std::string& image,
                   const std::string& layer, const std::string& target,
                   const std::string& out_dir) {
  const fs::path ckpt(checkpoint);
  if (!fs::exists(ckpt)) throw StageDependencyError(ckpt.string());
  fs::path sidecar_path = ckpt;
  sidecar_path.replace_extension(".json");
  if (!fs::exists(sidecar_path)) throw StageDependencyError(sidecar_path.string());
  const nlohmann::json sidecar = nlohmann::json::parse(read_text(sidecar_path));

  zoo::BackboneSpec spec;
  spec.name = sidecar.at("backbone").get<std::string>();
  spec.num_classes = sidecar.at("num_classes").get<int>();
  spec.pretrained = sidecar.value("pretrained", true);
  spec.feature_layer_id = sidecar.value("feature_layer", std::string{});
  zoo::ZooOptions opts;
  opts.seed = sidecar.value("seed", std::uint64_t{0});
  if (const char* dir = std::getenv("SIGNFLOW_BACKBONE_DIR"); dir && *dir)
    opts.backbone_dir = dir;
  auto model = zoo::build_model(spec, opts);
  model->load_weights_file(ckpt);

  // Checkpoints live at <run>/checkpoints/<fold>.ckpt; the sidecar's stats
  // reference is relative to <run>.
  const fs::path run_root = ckpt.parent_path().parent_path();
  const fs::path stats_path = run_root / sidecar.at("stats_file").get<std::string>();
  if (!fs::exists(stats_path)) throw StageDependencyError(stats_path.string());
  const nlohmann::json stats_doc = nlohmann::json::parse(read_text(stats_path));
  prep::NormalizationStats stats;
  stats_doc.at("mean").get_to(stats.mean);
  stats_doc.at("stddev").get_to(stats.stddev);

  std::optional<int> target_class;
  if (target != "auto") {
    try {
      target_class = std::stoi(target);
    } catch (const std::exception&) {
      // A class name: resolve through the run's annotated manifest.
      const fs::path manifest_path = run_root / "manifests" / "annotated.json";
      if (!fs::exists(manifest_path))
        throw UnknownClassError(target + " (no manifest to resolve names; pass an index)");
      const ingest::DatasetManifest m = ingest::load_manifest(manifest_path);
      const auto it = std::find(m.classes.begin(), m.classes.end(), target);
      if (it == m.classes.end()) throw UnknownClassError(target);
      target_class = static_cast<int>(it - m.classes.begin());
    }
    if (*target_class < 0 || *target_class >= spec.num_classes)
      throw UnknownClassError("class index " + std::to_string(*target_class) +
                              " outside 0.." + std::to_string(spec.num_classes - 1));
  }

  prep::PreprocessConfig pre;  // 224x224, replicate3, no augmentation
  const prep::ImageTensor raw = imageio::decode(image);
  const prep::ImageTensor input = prep::run_pipeline(raw, pre, &stats);
  const gradcam::CamResult cam = gradcam::explain(*model, input, target_class, layer);

  fs::create_directories(out_dir);
  const std::string stem = fs::path(image).stem().string();
  prep::ImageTensor cam_gray = nn::to_hwc(cam.upsampled);
  for (double& v : cam_gray.data) v *= 255.0;
  imageio::encode(cam_gray, fs::path(out_dir) / (stem + "_cam.png"));
  imageio::encode(gradcam::overlay(raw, cam, 0.4), fs::path(out_dir) / (stem + "_overlay.png"));
  write_text(fs::path(out_dir) / (stem + "_provenance.json"),
             gradcam::provenance_json(cam, 0.4, sidecar.value("config_hash", ""), image));
  log::info("explained " + image + " -> " + out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signflow: reproducible sign-language image classification pipeline"};
  app.require_subcommand(1);

  std::string config_file, baselines_file;
  std::vector<std::string> synthetic_args;
  std::string in_manifest, out_path, checkpoint, image, layer, target = "auto", run_dir;
  std::int64_t cap = 1250;
  std::uint64_t seed = 0;
  int fold = -1;
  std::string phase = "test";

  auto* run_cmd = app.add_subcommand("run", "All stages in order");
  run_cmd->add_option("--config", config_file, "Experiment config (JSON)")->required();
  run_cmd->add_option("--baselines", baselines_file, "Baseline CSV for the comparison table");

  auto* prepare = app.add_subcommand("prepare", "Ingest the dataset into a manifest");
  prepare->add_option("--config", config_file)->required();
  prepare
      ->add_option("--synthetic", synthetic_args,
                   "Generate a synthetic dataset first: <classes> <per-class>")
      ->expected(2);

  auto* balance_cmd = app.add_subcommand("balance", "Cap per-class counts by undersampling");
  balance_cmd->add_option("--config", config_file, "Stage mode: config of the run");
  balance_cmd->add_option("--in", in_manifest, "File mode: input manifest");
  balance_cmd->add_option("--out", out_path, "File mode: output manifest");
  balance_cmd->add_option("--cap", cap, "File mode: per-class cap");
  balance_cmd->add_option("--seed", seed, "File mode: sampling seed");

  auto* split_cmd = app.add_subcommand("split", "Stratified holdout + k-fold assignment");
  split_cmd->add_option("--config", config_file)->required();

  auto* train_cmd = app.add_subcommand("train", "Cross-validated training");
  train_cmd->add_option("--config", config_file)->required();

  auto* evaluate = app.add_subcommand("evaluate", "Metrics on validation and test splits");
  evaluate->add_option("--config", config_file)->required();
  evaluate->add_option("--fold", fold, "Evaluate one fold only (prints its report rows)");
  evaluate->add_option("--phase", phase, "With --fold: validation | test | both")
      ->check(CLI::IsMember({"validation", "test", "both"}));

  auto* explain = app.add_subcommand("explain", "Grad-CAM explanations");
  explain->add_option("--config", config_file, "Stage mode: config of the run");
  explain->add_option("--checkpoint", checkpoint, "File mode: trained checkpoint");
  explain->add_option("--image", image, "File mode: image to explain");
  explain->add_option("--layer", layer, "Feature layer (default: backbone default)");
  explain->add_option("--target", target, "auto (predicted) | class index | class name");
  explain->add_option("--out", out_path, "File mode: output directory");

  auto* report_cmd = app.add_subcommand("report", "Render tables and figures");
  report_cmd->add_option("--config", config_file, "Stage mode: config of the run");
  report_cmd->add_option("--run-dir", run_dir, "Site mode: existing run directory");
  report_cmd->add_option("--out", out_path, "Site mode: output site directory");
  report_cmd->add_option("--baselines", baselines_file, "Baseline CSV for the comparison table");

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<fs::path> baselines;
    if (!baselines_file.empty()) baselines = baselines_file;

    if (run_cmd->parsed()) {
      const auto cfg = load_cfg(config_file);
      pipeline::RunLock lock(pipeline::run_paths(cfg));
      pipeline::run(cfg, baselines);
    } else if (prepare->parsed()) {
      const auto cfg = load_cfg(config_file);
      if (!synthetic_args.empty())
        synth::generate_dataset(cfg.dataset.root, std::stoi(synthetic_args[0]),
                                std::stoi(synthetic_args[1]), cfg.split.seed);
      pipeline::RunLock lock(pipeline::run_paths(cfg));
      pipeline::stage_prepare(cfg);
    } else if (balance_cmd->parsed()) {
      if (!in_manifest.empty() || !out_path.empty()) {
        if (in_manifest.empty() || out_path.empty())
          throw ConfigError("balance", "file mode needs both --in and --out");
        balance_files(in_manifest, out_path, cap, seed);
      } else {
        const auto cfg = load_cfg(config_file);
        pipeline::RunLock lock(pipeline::run_paths(cfg));
        pipeline::stage_balance(cfg);
      }
    } else if (split_cmd->parsed()) {
      const auto cfg = load_cfg(config_file);
      pipeline::RunLock lock(pipeline::run_paths(cfg));
      pipeline::stage_split(cfg);
    } else if (train_cmd->parsed()) {
      const auto cfg = load_cfg(config_file);
      pipeline::RunLock lock(pipeline::run_paths(cfg));
      pipeline::stage_train(cfg);
    } else if (evaluate->parsed()) {
      const auto cfg = load_cfg(config_file);
      pipeline::RunLock lock(pipeline::run_paths(cfg));
      if (fold >= 0) {
        const auto rows = pipeline::evaluate_single(cfg, fold, phase);
        std::cout << report::fold_reports_to_json(rows);
      } else {
        pipeline::stage_evaluate(cfg);
      }
    } else if (explain->parsed()) {
      if (!checkpoint.empty() || !image.empty()) {
        if (checkpoint.empty() || image.empty() || out_path.empty())
          throw ConfigError("explain", "file mode needs --checkpoint, --image and --out");
        explain_files(checkpoint, image, layer, target, out_path);
      } else {
        const auto cfg = load_cfg(config_file);
        pipeline::RunLock lock(pipeline::run_paths(cfg));
        pipeline::stage_explain(cfg);
      }
    } else if (report_cmd->parsed()) {
      if (!run_dir.empty()) {
        if (out_path.empty()) throw ConfigError("report", "site mode needs --out");
        const fs::path snapshot = fs::path(run_dir) / "config.json";
        if (!fs::exists(snapshot)) throw StageDependencyError(snapshot.string());
        const auto cfg = config::parse_config(read_text(snapshot));
        pipeline::render_site(cfg, run_dir, out_path, baselines);
      } else {
        const auto cfg = load_cfg(config_file);
        pipeline::RunLock lock(pipeline::run_paths(cfg));
        pipeline::stage_report(cfg, baselines);
      }
    }
  } catch (const Error& e) {
    std::cerr << "signflow: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "signflow: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
