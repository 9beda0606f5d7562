#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "signflow/manifest.hpp"
#include "signflow/model_zoo.hpp"
#include "signflow/preprocess.hpp"

namespace signflow::train {

struct HyperParams {
  std::string optimizer = "adamw";
  double learning_rate = 1e-4;
  int batch_size = 16;
  int max_epochs = 10;
  double weight_decay = 1e-4;
  bool early_stopping = true;
  int patience = 3;        // P: stagnant epochs before early stop
  int lr_patience = 2;     // Q: stagnant epochs before an LR reduction
  double lr_factor = 0.1;  // F
  double min_delta = 1e-4;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;  // rate in effect during the epoch
  double wall_time_sec = 0.0;
};

struct TrainedFold {
  int fold = -1;
  std::string checkpoint;  // filled in by the caller after serialization
  std::string stats_file;
  std::vector<EpochLog> epochs;
  std::string stopping_reason;  // max_epochs | early_stop
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  // Sorted unique paths of every sample used in a training step (audit log
  // backing the fold-disjointness property).
  std::vector<std::string> trained_sample_paths;
};

// ReduceLROnPlateau. Improvement means val_loss < best - min_delta; after
// `patience` consecutive non-improving epochs the rate is multiplied by
// `factor` and the stagnation counter restarts.
struct PlateauState {
  double lr = 0.0;
  double factor = 0.1;
  int patience = 2;
  double min_delta = 1e-4;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
};
double lr_plateau_step(PlateauState& state, double val_loss);

// Early stopping on validation loss with the same improvement rule.
struct EarlyStopState {
  int patience = 3;
  double min_delta = 1e-4;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;
};
// Returns true when training should stop after this epoch.
bool early_stop_step(EarlyStopState& state, int epoch, double val_loss);

// Maps a manifest sample to the preprocessed tensor fed to the model.
using Loader = std::function<prep::ImageTensor(const ingest::SampleRecord&)>;

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate_loss(zoo::Model& model, const std::vector<ingest::SampleRecord>& samples,
                         const Loader& loader, int batch_size);

// Runs the epoch loop on one fold. The model is left holding the weights of
// the best-validation-loss epoch. `seed` should already be fold-specific;
// batch shuffling is keyed on (seed, epoch).
TrainedFold train_fold(zoo::Model& model, const std::vector<ingest::SampleRecord>& train_set,
                       const std::vector<ingest::SampleRecord>& val_set, const HyperParams& hp,
                       std::uint64_t seed, const Loader& loader);

struct FoldOutcome {
  int fold = -1;
  bool ok = false;
  std::string error;  // set when !ok
  TrainedFold trained;
};

using ModelFactory = std::function<std::unique_ptr<zoo::Model>(int fold)>;
// Builds the per-fold loader; invoked with the fold's training subset so the
// implementation can fit normalization stats on it (and nothing else).
using LoaderFactory =
    std::function<Loader(int fold, const std::vector<ingest::SampleRecord>& train_set)>;
// Called once per successful fold while the trained model is still alive;
// the place to serialize checkpoints and logs.
using FoldSink = std::function<void(int fold, zoo::Model& model, TrainedFold& trained)>;

// Trains every fold present in the manifest annotations. A failing fold is
// reported in its outcome; remaining folds still run.
std::vector<FoldOutcome> run_cv(const ingest::DatasetManifest& manifest, int k,
                                const ModelFactory& model_factory,
                                const LoaderFactory& loader_factory, const HyperParams& hp,
                                std::uint64_t seed, const FoldSink& sink = {});

// Artifact emission: one JSONL record per epoch plus a header record carrying
// the config hash. Wall-time values are informational; comparison tooling
// normalizes them before diffing.
void write_epoch_log(const std::filesystem::path& path, const TrainedFold& fold,
                     const std::string& config_hash);
std::vector<EpochLog> read_epoch_log(const std::filesystem::path& path,
                                     std::string* config_hash = nullptr);

void write_checkpoint_sidecar(const std::filesystem::path& path, const zoo::BackboneSpec& spec,
                              const TrainedFold& fold, std::uint64_t seed,
                              const std::string& config_hash);

}  // namespace signflow::train
