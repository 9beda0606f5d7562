#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "signflow/split.hpp"
#include "signflow/trainer.hpp"

namespace signflow::config {

struct DatasetConfig {
  std::string name;
  std::string root;
  std::int64_t cap = 1250;
  std::string channel_policy = "replicate3";  // replicate3 | keep
};

struct SplitConfig {
  split::SplitRatios ratios;  // 0.8 / 0.1 / 0.1
  int k = 5;
  std::uint64_t seed = 42;  // the run's global seed; stages derive from it
};

struct ModelConfig {
  std::string backbone = "mobilenet_v3";
  bool pretrained = true;
  std::string feature_layer;  // empty = backbone default
};

struct MetricsConfig {
  std::string aggregation = "macro";  // macro | weighted | micro
};

struct PreprocessConfigSection {
  std::vector<std::string> augmentation;  // optional section, default none
};

struct ExplainConfig {
  std::string layer;     // empty = model feature layer
  double opacity = 0.4;
  int samples = 3;       // test images to explain
};

struct OutputConfig {
  std::string dir;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  SplitConfig split;
  ModelConfig model;
  train::HyperParams train;
  MetricsConfig metrics;
  PreprocessConfigSection preprocess;
  ExplainConfig explain;
  OutputConfig output;
};

// Parses + validates; unknown keys and invalid values raise ConfigError with
// the offending field path. SIGNFLOW_OUTPUT_DIR overrides output.dir.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& file);

// Canonical serialization (sorted keys, stable number formatting). Writing
// and re-parsing yields an identical canonical form.
std::string to_canonical_json(const ExperimentConfig& cfg);

// FNV-1a 64 over the canonical form with the output section removed, as 16
// hex digits. Rendered artifacts embed this.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace signflow::config
