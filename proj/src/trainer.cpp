#include "signflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/log.hpp"
#include "signflow/rng.hpp"
#include "signflow/split.hpp"

namespace signflow::train {

using nlohmann::json;

double lr_plateau_step(PlateauState& state, double val_loss) {
  if (!std::isfinite(val_loss)) throw DivergenceError(0, "non-finite validation loss");
  if (val_loss < state.best - state.min_delta) {
    state.best = val_loss;
    state.stale = 0;
  } else if (++state.stale >= state.patience) {
    state.lr *= state.factor;
    state.stale = 0;
  }
  return state.lr;
}

bool early_stop_step(EarlyStopState& state, int epoch, double val_loss) {
  if (val_loss < state.best - state.min_delta) {
    state.best = val_loss;
    state.best_epoch = epoch;
    state.stale = 0;
    return false;
  }
  return ++state.stale >= state.patience;
}

EvalResult evaluate_loss(zoo::Model& model, const std::vector<ingest::SampleRecord>& samples,
                         const Loader& loader, int batch_size) {
  if (samples.empty()) throw EmptyEvaluationError();
  model.set_train_mode(false);
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (std::size_t start = 0; start < samples.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<prep::ImageTensor> batch;
    std::vector<int> labels;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(loader(samples[i]));
      labels.push_back(samples[i].label_index);
    }
    const auto rows = model.forward(batch);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      loss_sum += nn::cross_entropy(rows[i], labels[i]);
      const auto arg =
          std::max_element(rows[i].begin(), rows[i].end()) - rows[i].begin();
      if (static_cast<int>(arg) == labels[i]) ++correct;
    }
  }
  EvalResult r;
  r.loss = loss_sum / static_cast<double>(samples.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return r;
}

namespace {

void validate(const HyperParams& hp) {
  if (hp.learning_rate <= 0.0) throw ConfigError("train.learning_rate", "must be > 0");
  if (hp.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (hp.max_epochs < 1) throw ConfigError("train.max_epochs", "must be >= 1");
  if (hp.lr_factor <= 0.0 || hp.lr_factor >= 1.0)
    throw ConfigError("train.lr_factor", "must lie in (0, 1)");
  if (hp.patience < 1) throw ConfigError("train.patience", "must be >= 1");
  if (hp.lr_patience < 1) throw ConfigError("train.lr_patience", "must be >= 1");
}

}  // namespace

TrainedFold train_fold(zoo::Model& model, const std::vector<ingest::SampleRecord>& train_set,
                       const std::vector<ingest::SampleRecord>& val_set, const HyperParams& hp,
                       std::uint64_t seed, const Loader& loader) {
  validate(hp);
  if (train_set.empty()) throw EmptyTrainSetError();
  if (val_set.empty()) throw EvaluationError("validation set is empty");

  model.configure_optimizer(hp.learning_rate, hp.weight_decay);
  PlateauState plateau{hp.learning_rate, hp.lr_factor, hp.lr_patience, hp.min_delta};
  EarlyStopState stopper{hp.patience, hp.min_delta};

  TrainedFold out;
  std::set<std::string> audit;
  std::stringstream best_weights;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(seed, "epoch/" + std::to_string(epoch)));
    rng.shuffle(order);

    const double lr_used = model.learning_rate();
    model.set_train_mode(true);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      std::vector<prep::ImageTensor> batch;
      std::vector<int> labels;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const ingest::SampleRecord& s = train_set[order[i]];
        batch.push_back(loader(s));
        labels.push_back(s.label_index);
        audit.insert(s.path);
      }
      const double batch_loss = model.train_step(batch, labels);
      if (!std::isfinite(batch_loss))
        throw DivergenceError(epoch, "training loss is not finite");
      loss_sum += batch_loss * static_cast<double>(end - start);
    }
    const double train_loss = loss_sum / static_cast<double>(train_set.size());

    const EvalResult val = evaluate_loss(model, val_set, loader, hp.batch_size);
    if (!std::isfinite(val.loss)) throw DivergenceError(epoch, "validation loss is not finite");

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = train_loss;
    entry.val_loss = val.loss;
    entry.val_accuracy = val.accuracy;
    entry.learning_rate = lr_used;
    entry.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.epochs.push_back(entry);

    const bool stop = early_stop_step(stopper, epoch, val.loss);
    if (stopper.best_epoch == epoch) {
      best_weights.str({});
      best_weights.clear();
      model.save_weights(best_weights);
    }
    const double new_lr = lr_plateau_step(plateau, val.loss);
    if (new_lr != lr_used) {
      log::info("epoch " + std::to_string(epoch) + ": plateau, lr -> " + std::to_string(new_lr));
      model.set_learning_rate(new_lr);
    }
    if (hp.early_stopping && stop) {
      out.stopping_reason = "early_stop";
      log::info("early stop after epoch " + std::to_string(epoch) + " (best epoch " +
                std::to_string(stopper.best_epoch) + ")");
      break;
    }
  }
  if (out.stopping_reason.empty()) out.stopping_reason = "max_epochs";

  out.best_epoch = stopper.best_epoch;
  out.best_val_loss = stopper.best;
  best_weights.seekg(0);
  model.load_weights(best_weights);
  out.trained_sample_paths.assign(audit.begin(), audit.end());
  return out;
}

std::vector<FoldOutcome> run_cv(const ingest::DatasetManifest& manifest, int k,
                                const ModelFactory& model_factory,
                                const LoaderFactory& loader_factory, const HyperParams& hp,
                                std::uint64_t seed, const FoldSink& sink) {
  std::vector<FoldOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(k));
  for (int fold = 0; fold < k; ++fold) {
    FoldOutcome outcome;
    outcome.fold = fold;
    try {
      const split::FoldSets sets = split::fold_sets(manifest, fold);
      auto model = model_factory(fold);
      const Loader loader = loader_factory(fold, sets.train);
      outcome.trained = train_fold(*model, sets.train, sets.val, hp,
                                   derive_seed(seed, "fold/" + std::to_string(fold)), loader);
      outcome.trained.fold = fold;
      if (sink) sink(fold, *model, outcome.trained);
      outcome.ok = true;
    } catch (const Error& e) {
      outcome.ok = false;
      outcome.error = "fold " + std::to_string(fold) + ": " + e.what();
      log::warn(outcome.error);
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

void write_epoch_log(const std::filesystem::path& path, const TrainedFold& fold,
                     const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write epoch log: " + path.string());
  json header{{"config_hash", config_hash},
              {"fold", fold.fold},
              {"stopping_reason", fold.stopping_reason},
              {"best_epoch", fold.best_epoch}};
  out << header.dump() << '\n';
  for (const EpochLog& e : fold.epochs) {
    json rec{{"epoch", e.epoch},
             {"train_loss", e.train_loss},
             {"val_loss", e.val_loss},
             {"val_accuracy", e.val_accuracy},
             {"learning_rate", e.learning_rate},
             {"wall_time_sec", e.wall_time_sec}};
    out << rec.dump() << '\n';
  }
}

std::vector<EpochLog> read_epoch_log(const std::filesystem::path& path,
                                     std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read epoch log: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("epoch log is empty: " + path.string());
  const json header = json::parse(line);
  if (config_hash) *config_hash = header.value("config_hash", "");
  std::vector<EpochLog> logs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    EpochLog e;
    e.epoch = rec.at("epoch").get<int>();
    e.train_loss = rec.at("train_loss").get<double>();
    e.val_loss = rec.at("val_loss").get<double>();
    e.val_accuracy = rec.at("val_accuracy").get<double>();
    e.learning_rate = rec.at("learning_rate").get<double>();
    e.wall_time_sec = rec.at("wall_time_sec").get<double>();
    logs.push_back(e);
  }
  return logs;
}

void write_checkpoint_sidecar(const std::filesystem::path& path, const zoo::BackboneSpec& spec,
                              const TrainedFold& fold, std::uint64_t seed,
                              const std::string& config_hash) {
  json doc{{"backbone", spec.name},
           {"num_classes", spec.num_classes},
           {"feature_layer", spec.feature_layer_id},
           {"pretrained", spec.pretrained},
           {"fold", fold.fold},
           {"seed", seed},
           {"checkpoint", fold.checkpoint},
           {"stats_file", fold.stats_file},
           {"best_epoch", fold.best_epoch},
           {"stopping_reason", fold.stopping_reason},
           {"config_hash", config_hash}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint sidecar: " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace signflow::train
