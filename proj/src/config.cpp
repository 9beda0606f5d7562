#include "signflow/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/preprocess.hpp"
#include "signflow/rng.hpp"

namespace signflow::config {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& section,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      const std::string path = section.empty() ? key : section + "." + key;
      throw ConfigError(path, "unknown key");
    }
  }
}

const json& need(const json& obj, const std::string& section, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError(section.empty() ? key : section + "." + key, "missing required key");
  return *it;
}

template <class T>
T get_as(const json& obj, const std::string& section, const char* key, const T& fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key, "wrong type");
  }
}

template <class T>
T require(const json& obj, const std::string& section, const char* key) {
  const json& v = need(obj, section, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key, "wrong type");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  reject_unknown(root, "",
                 {"dataset", "split", "model", "train", "metrics", "preprocess", "explain",
                  "output"});

  ExperimentConfig cfg;

  const json& dataset = need(root, "", "dataset");
  if (!dataset.is_object()) throw ConfigError("dataset", "must be an object");
  reject_unknown(dataset, "dataset", {"name", "root", "cap", "channel_policy"});
  cfg.dataset.name = require<std::string>(dataset, "dataset", "name");
  cfg.dataset.root = require<std::string>(dataset, "dataset", "root");
  cfg.dataset.cap = get_as<std::int64_t>(dataset, "dataset", "cap", cfg.dataset.cap);
  cfg.dataset.channel_policy =
      get_as<std::string>(dataset, "dataset", "channel_policy", cfg.dataset.channel_policy);
  if (cfg.dataset.name.empty()) throw ConfigError("dataset.name", "must not be empty");
  if (cfg.dataset.root.empty()) throw ConfigError("dataset.root", "must not be empty");
  if (cfg.dataset.cap < 1) throw ConfigError("dataset.cap", "must be >= 1");
  if (cfg.dataset.channel_policy != "replicate3" && cfg.dataset.channel_policy != "keep")
    throw ConfigError("dataset.channel_policy", "must be 'replicate3' or 'keep'");

  if (root.contains("split")) {
    const json& split_sec = root["split"];
    if (!split_sec.is_object()) throw ConfigError("split", "must be an object");
    reject_unknown(split_sec, "split", {"ratios", "k", "seed"});
    if (split_sec.contains("ratios")) {
      const json& ratios = split_sec["ratios"];
      if (!ratios.is_array() || ratios.size() != 3)
        throw ConfigError("split.ratios", "must be an array of three numbers");
      try {
        cfg.split.ratios.train = ratios[0].get<double>();
        cfg.split.ratios.val = ratios[1].get<double>();
        cfg.split.ratios.test = ratios[2].get<double>();
      } catch (const json::exception&) {
        throw ConfigError("split.ratios", "must be numbers");
      }
      if (cfg.split.ratios.train <= 0 || cfg.split.ratios.val <= 0 || cfg.split.ratios.test <= 0)
        throw ConfigError("split.ratios", "all parts must be positive");
      if (std::abs(cfg.split.ratios.train + cfg.split.ratios.val + cfg.split.ratios.test - 1.0) >
          1e-9)
        throw ConfigError("split.ratios", "must sum to 1");
    }
    cfg.split.k = get_as<int>(split_sec, "split", "k", cfg.split.k);
    if (cfg.split.k < 2) throw ConfigError("split.k", "must be >= 2");
    cfg.split.seed = get_as<std::uint64_t>(split_sec, "split", "seed", cfg.split.seed);
  }

  if (root.contains("model")) {
    const json& model = root["model"];
    if (!model.is_object()) throw ConfigError("model", "must be an object");
    reject_unknown(model, "model", {"backbone", "pretrained", "feature_layer"});
    cfg.model.backbone = get_as<std::string>(model, "model", "backbone", cfg.model.backbone);
    cfg.model.pretrained = get_as<bool>(model, "model", "pretrained", cfg.model.pretrained);
    cfg.model.feature_layer =
        get_as<std::string>(model, "model", "feature_layer", cfg.model.feature_layer);
    if (cfg.model.backbone.empty()) throw ConfigError("model.backbone", "must not be empty");
  }

  if (root.contains("train")) {
    const json& tr = root["train"];
    if (!tr.is_object()) throw ConfigError("train", "must be an object");
    reject_unknown(tr, "train",
                   {"optimizer", "learning_rate", "batch_size", "max_epochs", "weight_decay",
                    "early_stopping", "patience", "lr_patience", "lr_factor", "min_delta"});
    auto& hp = cfg.train;
    hp.optimizer = get_as<std::string>(tr, "train", "optimizer", hp.optimizer);
    hp.learning_rate = get_as<double>(tr, "train", "learning_rate", hp.learning_rate);
    hp.batch_size = get_as<int>(tr, "train", "batch_size", hp.batch_size);
    hp.max_epochs = get_as<int>(tr, "train", "max_epochs", hp.max_epochs);
    hp.weight_decay = get_as<double>(tr, "train", "weight_decay", hp.weight_decay);
    hp.early_stopping = get_as<bool>(tr, "train", "early_stopping", hp.early_stopping);
    hp.patience = get_as<int>(tr, "train", "patience", hp.patience);
    hp.lr_patience = get_as<int>(tr, "train", "lr_patience", hp.lr_patience);
    hp.lr_factor = get_as<double>(tr, "train", "lr_factor", hp.lr_factor);
    hp.min_delta = get_as<double>(tr, "train", "min_delta", hp.min_delta);
    if (hp.optimizer != "adamw")
      throw ConfigError("train.optimizer", "only 'adamw' is supported");
    if (hp.learning_rate <= 0) throw ConfigError("train.learning_rate", "must be > 0");
    if (hp.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (hp.max_epochs < 1) throw ConfigError("train.max_epochs", "must be >= 1");
    if (hp.weight_decay < 0) throw ConfigError("train.weight_decay", "must be >= 0");
    if (hp.lr_factor <= 0 || hp.lr_factor >= 1)
      throw ConfigError("train.lr_factor", "must lie in (0, 1)");
    if (hp.patience < 1) throw ConfigError("train.patience", "must be >= 1");
    if (hp.lr_patience < 1) throw ConfigError("train.lr_patience", "must be >= 1");
    if (hp.min_delta < 0) throw ConfigError("train.min_delta", "must be >= 0");
  }

  if (root.contains("metrics")) {
    const json& met = root["metrics"];
    if (!met.is_object()) throw ConfigError("metrics", "must be an object");
    reject_unknown(met, "metrics", {"aggregation"});
    cfg.metrics.aggregation =
        get_as<std::string>(met, "metrics", "aggregation", cfg.metrics.aggregation);
    if (cfg.metrics.aggregation != "macro" && cfg.metrics.aggregation != "weighted" &&
        cfg.metrics.aggregation != "micro")
      throw ConfigError("metrics.aggregation", "must be 'macro', 'weighted', or 'micro'");
  }

  if (root.contains("preprocess")) {
    const json& pp = root["preprocess"];
    if (!pp.is_object()) throw ConfigError("preprocess", "must be an object");
    reject_unknown(pp, "preprocess", {"augmentation"});
    cfg.preprocess.augmentation = get_as<std::vector<std::string>>(
        pp, "preprocess", "augmentation", cfg.preprocess.augmentation);
    prep::validate_augmentations(cfg.preprocess.augmentation);
  }

  if (root.contains("explain")) {
    const json& ex = root["explain"];
    if (!ex.is_object()) throw ConfigError("explain", "must be an object");
    reject_unknown(ex, "explain", {"layer", "opacity", "samples"});
    cfg.explain.layer = get_as<std::string>(ex, "explain", "layer", cfg.explain.layer);
    cfg.explain.opacity = get_as<double>(ex, "explain", "opacity", cfg.explain.opacity);
    cfg.explain.samples = get_as<int>(ex, "explain", "samples", cfg.explain.samples);
    if (cfg.explain.opacity < 0 || cfg.explain.opacity > 1)
      throw ConfigError("explain.opacity", "must lie in [0, 1]");
    if (cfg.explain.samples < 0) throw ConfigError("explain.samples", "must be >= 0");
  }

  const json& output = need(root, "", "output");
  if (!output.is_object()) throw ConfigError("output", "must be an object");
  reject_unknown(output, "output", {"dir"});
  cfg.output.dir = require<std::string>(output, "output", "dir");
  if (cfg.output.dir.empty()) throw ConfigError("output.dir", "must not be empty");

  if (const char* env_dir = std::getenv("SIGNFLOW_OUTPUT_DIR"); env_dir && *env_dir)
    cfg.output.dir = env_dir;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read config: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_canonical_json(const ExperimentConfig& cfg) {
  json root{
      {"dataset",
       {{"name", cfg.dataset.name},
        {"root", cfg.dataset.root},
        {"cap", cfg.dataset.cap},
        {"channel_policy", cfg.dataset.channel_policy}}},
      {"split",
       {{"ratios", {cfg.split.ratios.train, cfg.split.ratios.val, cfg.split.ratios.test}},
        {"k", cfg.split.k},
        {"seed", cfg.split.seed}}},
      {"model",
       {{"backbone", cfg.model.backbone},
        {"pretrained", cfg.model.pretrained},
        {"feature_layer", cfg.model.feature_layer}}},
      {"train",
       {{"optimizer", cfg.train.optimizer},
        {"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"max_epochs", cfg.train.max_epochs},
        {"weight_decay", cfg.train.weight_decay},
        {"early_stopping", cfg.train.early_stopping},
        {"patience", cfg.train.patience},
        {"lr_patience", cfg.train.lr_patience},
        {"lr_factor", cfg.train.lr_factor},
        {"min_delta", cfg.train.min_delta}}},
      {"metrics", {{"aggregation", cfg.metrics.aggregation}}},
      {"preprocess", {{"augmentation", cfg.preprocess.augmentation}}},
      {"explain",
       {{"layer", cfg.explain.layer},
        {"opacity", cfg.explain.opacity},
        {"samples", cfg.explain.samples}}},
      {"output", {{"dir", cfg.output.dir}}}};
  return root.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  json root = json::parse(to_canonical_json(cfg));
  root.erase("output");  // moving a run directory must not change identity
  const std::uint64_t h = fnv1a64(root.dump());
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace signflow::config
