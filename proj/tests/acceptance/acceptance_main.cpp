// Acceptance gate: one self-contained check per criterion, one PASS/FAIL line
// each, nonzero exit when anything fails. Every numeric check is validated
// against an oracle computed here with independent arithmetic, never against
// the library's own intermediate results.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "signflow/balance.hpp"
#include "signflow/config.hpp"
#include "signflow/errors.hpp"
#include "signflow/gradcam.hpp"
#include "signflow/manifest.hpp"
#include "signflow/metrics.hpp"
#include "signflow/model_zoo.hpp"
#include "signflow/nn.hpp"
#include "signflow/pipeline.hpp"
#include "signflow/preprocess.hpp"
#include "signflow/report.hpp"
#include "signflow/rng.hpp"
#include "signflow/split.hpp"
#include "signflow/synthetic.hpp"
#include "signflow/trainer.hpp"

using namespace signflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria 1 + 2: metric aggregation vs a nested-loop one-vs-rest oracle.

struct OracleAgg {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct OracleMetrics {
  double accuracy = 0.0;
  OracleAgg macro, weighted, micro;
};

OracleMetrics oracle_metrics(const metrics::ConfusionMatrix& cm) {
  const std::size_t c = cm.classes.size();
  std::int64_t total = 0, correct = 0;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) total += cm.at(i, j);
  for (std::size_t i = 0; i < c; ++i) correct += cm.at(i, i);

  OracleMetrics out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(total);

  std::int64_t tp_pool = 0, fp_pool = 0, fn_pool = 0;
  double mp = 0, mr = 0, mf = 0, wp = 0, wr = 0, wf = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::int64_t tp = cm.at(k, k), fp = 0, fn = 0;
    for (std::size_t i = 0; i < c; ++i)
      if (i != k) fp += cm.at(i, k);
    for (std::size_t j = 0; j < c; ++j)
      if (j != k) fn += cm.at(k, j);
    const std::int64_t support = tp + fn;
    const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = support == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(support);
    const std::int64_t fden = 2 * tp + fp + fn;
    const double f = fden == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(fden);
    mp += p;
    mr += r;
    mf += f;
    wp += static_cast<double>(support) * p;
    wr += static_cast<double>(support) * r;
    wf += static_cast<double>(support) * f;
    tp_pool += tp;
    fp_pool += fp;
    fn_pool += fn;
  }
  const auto cd = static_cast<double>(c);
  const auto td = static_cast<double>(total);
  out.macro = {mp / cd, mr / cd, mf / cd};
  out.weighted = {wp / td, wr / td, wf / td};
  out.micro = {static_cast<double>(tp_pool) / static_cast<double>(tp_pool + fp_pool),
               static_cast<double>(tp_pool) / static_cast<double>(tp_pool + fn_pool),
               static_cast<double>(2 * tp_pool) /
                   static_cast<double>(2 * tp_pool + fp_pool + fn_pool)};
  return out;
}

metrics::ConfusionMatrix random_confusion(Rng& rng) {
  const auto c = static_cast<std::size_t>(2 + rng.next_below(39));  // 2..40 classes
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c; ++i) names.push_back("c" + std::to_string(i));
  metrics::ConfusionMatrix cm(names);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      cm.at(i, j) = static_cast<std::int64_t>(rng.next_below(30));
  // Zeroed rows/columns exercise the undefined-precision/recall convention.
  if (rng.next_below(4) == 0) {
    const auto row = static_cast<std::size_t>(rng.next_below(c));
    for (std::size_t j = 0; j < c; ++j) cm.at(row, j) = 0;
  }
  if (rng.next_below(4) == 0) {
    const auto col = static_cast<std::size_t>(rng.next_below(c));
    for (std::size_t i = 0; i < c; ++i) cm.at(i, col) = 0;
  }
  if (cm.total() == 0) cm.at(0, 0) = 5;
  return cm;
}

Outcome criterion_metric_oracle() {
  Rng rng(derive_seed(2026, "acceptance/metrics"));
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const metrics::ConfusionMatrix cm = random_confusion(rng);
    const OracleMetrics want = oracle_metrics(cm);
    const double acc = metrics::accuracy(cm);
    worst = std::max(worst, std::fabs(acc - want.accuracy));
    const std::pair<std::string, OracleAgg> cases[] = {
        {"macro", want.macro}, {"weighted", want.weighted}, {"micro", want.micro}};
    for (const auto& [agg, expect] : cases) {
      const metrics::MetricBundle got = metrics::precision_recall_f1(cm, agg);
      worst = std::max({worst, std::fabs(got.precision - expect.precision),
                        std::fabs(got.recall - expect.recall), std::fabs(got.f1 - expect.f1),
                        std::fabs(got.accuracy - want.accuracy)});
      if (worst > 1e-12)
        return {false, "matrix " + std::to_string(n) + " " + agg +
                           " deviates by " + fmt(worst)};
    }
  }
  return {true, "1000 matrices, max |delta| " + fmt(worst)};
}

Outcome criterion_micro_identity() {
  Rng rng(derive_seed(2026, "acceptance/metrics"));  // same matrix stream
  for (int n = 0; n < 1000; ++n) {
    const metrics::ConfusionMatrix cm = random_confusion(rng);
    const metrics::MetricBundle micro = metrics::precision_recall_f1(cm, "micro");
    const double acc = metrics::accuracy(cm);
    if (micro.precision != micro.recall || micro.recall != micro.f1 || micro.f1 != acc)
      return {false, "matrix " + std::to_string(n) + ": micro P/R/F1/accuracy not identical"};
  }
  return {true, "micro P = R = F1 = accuracy bit-exact on 1000 matrices"};
}

// ---------------------------------------------------------------------------
// Criterion 3: stratified holdout + k-fold invariants.

Outcome criterion_split_invariants() {
  Rng rng(derive_seed(2026, "acceptance/split"));
  const split::SplitRatios ratios;
  for (int n = 0; n < 200; ++n) {
    const int classes = 2 + static_cast<int>(rng.next_below(11));
    const ingest::DatasetManifest m = testutil::random_manifest(rng, classes, 10, 500);
    const split::SplitAssignment holdout = split::stratified_holdout(m, rng.next_u64(), ratios);
    const split::FoldAssignment folds = split::stratified_kfold(m, holdout, 5, rng.next_u64());

    if (holdout.tag.size() != m.samples.size())
      return {false, "manifest " + std::to_string(n) + ": holdout not exhaustive"};
    std::map<std::string, std::array<std::int64_t, 3>> per_class;  // train/val/test
    std::map<std::string, std::int64_t> class_total;
    std::int64_t folded_expected = 0;
    for (const ingest::SampleRecord& s : m.samples) {
      const auto it = holdout.tag.find(s.path);
      if (it == holdout.tag.end())
        return {false, "manifest " + std::to_string(n) + ": sample missing from holdout"};
      ++class_total[s.label];
      if (it->second == "train")
        ++per_class[s.label][0];
      else if (it->second == "val")
        ++per_class[s.label][1];
      else if (it->second == "test")
        ++per_class[s.label][2];
      else
        return {false, "unknown tag '" + it->second + "'"};
      if (it->second != "test") ++folded_expected;
    }
    for (const auto& [cls, counts] : per_class) {
      const double nc = static_cast<double>(class_total[cls]);
      const double want[3] = {ratios.train * nc, ratios.val * nc, ratios.test * nc};
      for (int p = 0; p < 3; ++p)
        if (std::fabs(static_cast<double>(counts[p]) - want[p]) > 1.0 + 1e-9)
          return {false, "manifest " + std::to_string(n) + " class " + cls +
                             ": proportion off by more than one sample"};
      if (counts[0] + counts[1] + counts[2] != class_total[cls])
        return {false, "class " + cls + ": split sizes do not sum"};
    }

    if (static_cast<std::int64_t>(folds.fold.size()) != folded_expected)
      return {false, "manifest " + std::to_string(n) + ": fold map misses folded samples"};
    std::map<std::string, std::array<std::int64_t, 5>> fold_counts;
    for (const ingest::SampleRecord& s : m.samples) {
      const auto it = folds.fold.find(s.path);
      const bool is_test = holdout.tag.at(s.path) == "test";
      if (is_test) {
        if (it != folds.fold.end())
          return {false, "test sample " + s.path + " entered a fold"};
        continue;
      }
      if (it == folds.fold.end())
        return {false, "folded sample " + s.path + " missing a fold index"};
      if (it->second < 0 || it->second >= 5)
        return {false, "fold index out of range for " + s.path};
      ++fold_counts[s.label][static_cast<std::size_t>(it->second)];
    }
    for (const auto& [cls, counts] : fold_counts) {
      const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
      if (*hi - *lo > 1)
        return {false, "class " + cls + ": fold sizes differ by more than one"};
    }

    // The annotated manifest must agree with both assignment maps.
    const ingest::DatasetManifest ann = split::annotate(m, holdout, folds);
    for (const ingest::SampleRecord& s : ann.samples) {
      if (s.split != holdout.tag.at(s.path)) return {false, "annotation tag mismatch"};
      if (s.split == "test" && s.fold != -1) return {false, "test sample carries a fold"};
      if (s.split != "test" && s.fold != folds.fold.at(s.path))
        return {false, "annotation fold mismatch"};
    }
  }
  return {true, "200 manifests: disjoint, exhaustive, |proportion error| <= 1, single fold"};
}

// ---------------------------------------------------------------------------
// Criterion 4: undersampling cap invariants.

Outcome criterion_balance_invariants() {
  Rng rng(derive_seed(2026, "acceptance/balance"));
  for (int n = 0; n < 100; ++n) {
    const int classes = 2 + static_cast<int>(rng.next_below(7));
    const ingest::DatasetManifest m = testutil::random_manifest(rng, classes, 5, 2200);
    const balance::BalancePolicy policy{1250, rng.next_u64()};
    const ingest::DatasetManifest b = balance::undersample(m, policy);
    const ingest::DatasetManifest b2 = balance::undersample(m, policy);
    if (!(b == b2)) return {false, "manifest " + std::to_string(n) + ": not seed-deterministic"};

    std::map<std::string, std::int64_t> orig, kept;
    std::set<std::string> orig_paths;
    for (const ingest::SampleRecord& s : m.samples) {
      ++orig[s.label];
      orig_paths.insert(s.path);
    }
    std::set<std::string> kept_paths;
    for (const ingest::SampleRecord& s : b.samples) {
      ++kept[s.label];
      if (!orig_paths.count(s.path))
        return {false, "balanced sample " + s.path + " not in the original manifest"};
      if (!kept_paths.insert(s.path).second)
        return {false, "balanced manifest duplicates " + s.path};
    }
    for (const auto& [cls, count] : orig) {
      const std::int64_t want = std::min<std::int64_t>(count, 1250);
      if (kept[cls] != want)
        return {false, "class " + cls + ": kept " + std::to_string(kept[cls]) + ", want " +
                           std::to_string(want)};
    }
  }
  return {true, "100 manifests: count = min(original, 1250), subset, deterministic"};
}

// ---------------------------------------------------------------------------
// Criterion 5: preprocessing fidelity.

Outcome criterion_preprocess_fidelity() {
  // Constant images resize exactly, whatever the geometry.
  const struct {
    int h, w, oh, ow;
    double v;
  } shapes[] = {{17, 13, 64, 80, 3.7}, {5, 9, 3, 20, 0.0}, {32, 32, 224, 224, 101.0}};
  for (const auto& s : shapes) {
    const prep::ImageTensor img(s.h, s.w, 3, s.v);
    const prep::ImageTensor out = prep::resize(img, s.oh, s.ow);
    for (const double px : out.data)
      if (px != s.v) return {false, "constant resize is not exact"};
  }

  prep::ImageTensor trio(1, 3, 1, 0.0);
  trio.data = {0.0, 51.0, 255.0};
  const prep::ImageTensor scaled = prep::scale_unit(trio);
  if (scaled.data[0] != 0.0 || scaled.data[1] != 0.2 || scaled.data[2] != 1.0)
    return {false, "scale_unit misses {0, 51, 255} -> {0, 0.2, 1.0}"};

  // A re-standardized stream must have ~zero mean and ~unit variance.
  Rng rng(derive_seed(2026, "acceptance/preprocess"));
  std::vector<prep::ImageTensor> stream;
  for (int i = 0; i < 200; ++i) {
    prep::ImageTensor img(16, 16, 3, 0.0);
    for (double& v : img.data) v = 255.0 * rng.next_double();
    stream.push_back(prep::scale_unit(img));
  }
  const prep::NormalizationStats stats = prep::fit_stats(stream);
  std::array<double, 3> sum{}, sum_sq{};
  std::int64_t count = 0;
  for (const prep::ImageTensor& img : stream) {
    const prep::ImageTensor std_img = prep::standardize(img, stats);
    for (int y = 0; y < std_img.height; ++y)
      for (int x = 0; x < std_img.width; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          sum[static_cast<std::size_t>(ch)] += std_img.at(y, x, ch);
          sum_sq[static_cast<std::size_t>(ch)] += std_img.at(y, x, ch) * std_img.at(y, x, ch);
        }
    count += std_img.height * std_img.width;
  }
  double worst_mean = 0.0, worst_std = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const double mean = sum[static_cast<std::size_t>(ch)] / static_cast<double>(count);
    const double var =
        sum_sq[static_cast<std::size_t>(ch)] / static_cast<double>(count) - mean * mean;
    worst_mean = std::max(worst_mean, std::fabs(mean));
    worst_std = std::max(worst_std, std::fabs(std::sqrt(var) - 1.0));
  }
  if (worst_mean > 1e-3 || worst_std > 1e-3)
    return {false, "restandardized stream off: |mean| " + fmt(worst_mean) + ", |std-1| " +
                       fmt(worst_std)};
  return {true, "resize/scale exact; stream |mean| " + fmt(worst_mean) + ", |std-1| " +
                    fmt(worst_std)};
}

// ---------------------------------------------------------------------------
// Criterion 6: Grad-CAM numerics on a fixed seeded tiny CNN.

nn::Sequential cam_net(std::uint64_t seed) {
  Rng rng(seed);
  nn::Sequential net;
  net.add(std::make_unique<nn::Conv2d>("c1", 3, 8, 3, 2, 1, rng));
  net.add(std::make_unique<nn::ReLU6>("r1"));
  net.add(std::make_unique<nn::Conv2d>("c2", 8, 8, 3, 1, 1, rng));
  net.add(std::make_unique<nn::ReLU6>("r2"));
  net.add(std::make_unique<nn::GlobalAvgPool>("gap"));
  net.add(std::make_unique<nn::Linear>("fc", 8, 5, rng));
  return net;
}

zoo::BackboneSpec cam_spec() {
  zoo::BackboneSpec spec;
  spec.name = "acceptance_micro";
  spec.num_classes = 5;
  spec.pretrained = false;
  spec.feature_layer_id = "r2";
  return spec;
}

Outcome criterion_gradcam() {
  const std::uint64_t seed = derive_seed(2026, "acceptance/gradcam");
  auto model = zoo::make_micro_model(cam_net(seed), cam_spec());

  prep::ImageTensor img(16, 16, 3, 0.0);
  Rng pix(derive_seed(2026, "acceptance/gradcam/input"));
  for (double& v : img.data) v = 2.0 * pix.next_double() - 1.0;
  const int target = 3;

  // Probe the second conv output so the finite-difference path crosses the
  // ReLU6 nonlinearity in the tail.
  const zoo::ProbeResult probe = model->feature_and_gradient_probe(img, target, "c2");
  const gradcam::CamWeights weights = gradcam::cam_weights(probe.gradients);
  const int Z = probe.activations.height * probe.activations.width;
  if (weights.Z != Z) return {false, "Z mismatch"};

  // FD twin built from the same seed; perturbing a whole feature map by eps
  // changes the logit by eps * Z * alpha_k to first order.
  nn::Sequential twin = cam_net(seed);
  twin.forward(nn::from_hwc(img));
  const int idx = twin.layer_index("c2");
  const nn::Tensor base = twin.activation(idx);
  const double eps = 1e-5;
  double worst_rel = 0.0;
  for (int k = 0; k < base.channels; ++k) {
    nn::Tensor up = base, down = base;
    for (int y = 0; y < base.height; ++y)
      for (int x = 0; x < base.width; ++x) {
        up.at(k, y, x) += eps;
        down.at(k, y, x) -= eps;
      }
    const double y_up = twin.forward_from(idx, up).at(target, 0, 0);
    const double y_down = twin.forward_from(idx, down).at(target, 0, 0);
    const double fd = (y_up - y_down) / (2.0 * eps * static_cast<double>(Z));
    const double alpha = weights.alpha[static_cast<std::size_t>(k)];
    const double rel = std::fabs(fd - alpha) / std::max(std::fabs(alpha), 1e-8);
    worst_rel = std::max(worst_rel, rel);
  }
  if (worst_rel > 1e-4)
    return {false, "alpha finite-difference relative error " + fmt(worst_rel)};

  // Brute-force the ReLU-clamped weighted activation sum.
  const nn::Tensor cam = gradcam::cam_map(probe.activations, weights);
  double worst_map = 0.0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      double acc = 0.0;
      for (int k = 0; k < base.channels; ++k)
        acc += weights.alpha[static_cast<std::size_t>(k)] * probe.activations.at(k, y, x);
      worst_map = std::max(worst_map, std::fabs(cam.at(0, y, x) - std::max(0.0, acc)));
      if (cam.at(0, y, x) < 0.0) return {false, "negative cam value"};
    }
  if (worst_map > 1e-10) return {false, "cam_map deviates from brute force by " + fmt(worst_map)};

  // Positive scaling of the head leaves the normalized heatmap unchanged.
  const gradcam::CamResult res = gradcam::explain(*model, img, target, "c2");
  for (const double v : res.upsampled.data)
    if (v < 0.0 || v > 1.0) return {false, "normalized heatmap escapes [0,1]"};
  nn::Sequential scaled_net = cam_net(seed);
  {
    std::vector<std::vector<double>*> params, grads;
    scaled_net.collect(params, grads);
    for (std::size_t i = params.size() - 2; i < params.size(); ++i)  // fc weight + bias
      for (double& v : *params[i]) v *= 3.0;
  }
  auto scaled = zoo::make_micro_model(std::move(scaled_net), cam_spec());
  const gradcam::CamResult res3 = gradcam::explain(*scaled, img, target, "c2");
  double worst_scale = 0.0;
  for (std::size_t i = 0; i < res.upsampled.data.size(); ++i)
    worst_scale =
        std::max(worst_scale, std::fabs(res.upsampled.data[i] - res3.upsampled.data[i]));
  if (worst_scale > 1e-10)
    return {false, "normalized heatmap not scale-invariant: " + fmt(worst_scale)};

  return {true, "alpha FD rel err " + fmt(worst_rel) + ", map delta " + fmt(worst_map) +
                    ", scale delta " + fmt(worst_scale)};
}

// ---------------------------------------------------------------------------
// Criterion 7: scheduler + early stopping vs a hand simulation.

struct SimResult {
  std::vector<double> lr_trace;
  int stop_epoch = -1;  // -1 = ran to the end
  int best_epoch = 0;
};

SimResult simulate(const std::vector<double>& losses, double lr0, double factor, int P, int Q,
                   double min_delta) {
  SimResult r;
  double lr = lr0;
  double best_lr = std::numeric_limits<double>::infinity();
  double best_stop = std::numeric_limits<double>::infinity();
  int stale_lr = 0, stale_stop = 0;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    const double v = losses[e];
    if (v < best_lr - min_delta) {
      best_lr = v;
      stale_lr = 0;
    } else if (++stale_lr >= Q) {
      lr *= factor;
      stale_lr = 0;
    }
    r.lr_trace.push_back(lr);
    if (v < best_stop - min_delta) {
      best_stop = v;
      r.best_epoch = static_cast<int>(e) + 1;
      stale_stop = 0;
    } else if (++stale_stop >= P && r.stop_epoch < 0) {
      r.stop_epoch = static_cast<int>(e) + 1;
      break;
    }
  }
  return r;
}

Outcome criterion_scheduler() {
  // The two pinned hand examples first.
  {
    const std::vector<double> seq{1.0, 0.9, 0.9, 0.9, 0.9};
    train::EarlyStopState stop;
    stop.patience = 3;
    int stopped = -1;
    for (std::size_t e = 0; e < seq.size(); ++e)
      if (train::early_stop_step(stop, static_cast<int>(e) + 1, seq[e])) {
        stopped = static_cast<int>(e) + 1;
        break;
      }
    if (stopped != 5 || stop.best_epoch != 2)
      return {false, "pinned early-stop example: stop " + std::to_string(stopped) + ", best " +
                         std::to_string(stop.best_epoch)};
  }
  {
    train::PlateauState lr;
    lr.lr = 1e-4;
    lr.factor = 0.1;
    lr.patience = 2;
    double out = lr.lr;
    for (const double v : {1.0, 1.0, 1.0}) out = train::lr_plateau_step(lr, v);
    if (out != 1e-4 * 0.1)
      return {false, "pinned plateau example: lr " + std::to_string(out)};
  }

  Rng rng(derive_seed(2026, "acceptance/scheduler"));
  for (int n = 0; n < 100; ++n) {
    const int len = 5 + static_cast<int>(rng.next_below(26));
    std::vector<double> losses;
    for (int e = 0; e < len; ++e) {
      if (!losses.empty() && rng.next_below(10) < 3)
        losses.push_back(losses.back());  // exact plateau
      else
        losses.push_back(0.25 + 1.5 * rng.next_double());
    }
    const double lr0 = 1e-3;
    const SimResult want = simulate(losses, lr0, 0.1, 3, 2, 1e-4);

    train::PlateauState plateau;
    plateau.lr = lr0;
    plateau.factor = 0.1;
    plateau.patience = 2;
    train::EarlyStopState stop;
    stop.patience = 3;
    int stopped = -1;
    for (std::size_t e = 0; e < losses.size(); ++e) {
      const double lr = train::lr_plateau_step(plateau, losses[e]);
      if (lr != want.lr_trace[e])
        return {false, "sequence " + std::to_string(n) + " epoch " + std::to_string(e + 1) +
                           ": lr " + fmt(lr) + " != " + fmt(want.lr_trace[e])};
      if (train::early_stop_step(stop, static_cast<int>(e) + 1, losses[e])) {
        stopped = static_cast<int>(e) + 1;
        break;
      }
    }
    if (stopped != want.stop_epoch)
      return {false, "sequence " + std::to_string(n) + ": stop epoch " +
                         std::to_string(stopped) + " != " + std::to_string(want.stop_epoch)};
    if (stop.best_epoch != want.best_epoch)
      return {false, "sequence " + std::to_string(n) + ": best epoch " +
                         std::to_string(stop.best_epoch) + " != " +
                         std::to_string(want.best_epoch)};
  }
  return {true, "100 sequences + 2 pinned examples, LR trace bit-exact"};
}

// ---------------------------------------------------------------------------
// Criterion 8: end-to-end smoke on a separable synthetic dataset.

Outcome criterion_end_to_end() {
  testutil::TempDir scratch;
  const fs::path data = scratch.path() / "data";
  synth::generate_dataset(data, 3, 60, 7, 32);

  config::ExperimentConfig cfg;
  cfg.dataset.name = "synthetic-smoke";
  cfg.dataset.root = data.string();
  cfg.split.k = 5;
  cfg.split.seed = 42;
  cfg.model.backbone = "tiny_cnn";
  cfg.model.pretrained = false;
  cfg.train.learning_rate = 0.01;
  cfg.train.batch_size = 16;
  cfg.train.max_epochs = 2;
  cfg.output.dir = (scratch.path() / "run").string();
  pipeline::run(cfg);

  const pipeline::RunPaths paths = pipeline::run_paths(cfg);
  std::ifstream in(paths.fold_reports());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::vector<report::FoldReport> rows = report::fold_reports_from_json(buf.str());
  if (rows.size() != 10)
    return {false, "expected 10 fold reports, found " + std::to_string(rows.size())};

  int val_rows = 0, test_rows = 0;
  double test_acc_sum = 0.0;
  for (const report::FoldReport& r : rows) {
    if (r.phase == "validation") ++val_rows;
    if (r.phase == "test") {
      ++test_rows;
      test_acc_sum += r.accuracy;
    }
  }
  if (val_rows != 5 || test_rows != 5)
    return {false, "phase split is " + std::to_string(val_rows) + " validation / " +
                       std::to_string(test_rows) + " test"};
  const double mean_acc = test_acc_sum / 5.0;
  if (mean_acc < 0.90) return {false, "mean test accuracy " + fmt(mean_acc) + " < 0.90"};

  for (int fold = 0; fold < 5; ++fold)
    if (!fs::exists(paths.confusion_image(fold)))
      return {false, "missing confusion figure for fold " + std::to_string(fold)};
  int overlays = 0;
  for (const auto& entry : fs::directory_iterator(paths.gradcam_dir())) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 12 && name.substr(name.size() - 12) == "_overlay.png") ++overlays;
  }
  if (overlays < 3) return {false, "only " + std::to_string(overlays) + " overlays rendered"};
  return {true, "mean test accuracy " + fmt(mean_acc) + ", " + std::to_string(overlays) +
                    " overlays, 5 confusion figures"};
}

// ---------------------------------------------------------------------------
// Criterion 9: architectural reference equations.

Outcome criterion_architecture() {
  // relu6 over a 1e-6-spaced grid on [-10, 10].
  const std::int64_t steps = 20'000'000;
  for (std::int64_t i = 0; i <= steps; ++i) {
    const double x = -10.0 + 1e-6 * static_cast<double>(i);
    const double y = zoo::relu6(x);
    const double want = x < 0.0 ? 0.0 : (x > 6.0 ? 6.0 : x);
    if (y != want || y < 0.0 || y > 6.0 || zoo::relu6(y) != y)
      return {false, "relu6 wrong at x = " + std::to_string(x)};
  }

  const zoo::CompoundScaling base = zoo::compound_scale(1.2, 1.1, 1.15, 0.0);
  if (base.depth != 1.0 || base.width != 1.0 || base.resolution != 1.0)
    return {false, "compound_scale(phi = 0) is not the identity"};
  Rng rng(derive_seed(2026, "acceptance/architecture"));
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    const double a = 1.0 + rng.next_double();
    const double b = 1.0 + rng.next_double();
    const double g = 1.0 + rng.next_double();
    const double phi = static_cast<double>(rng.next_below(5)) + (n % 2 == 0 ? 0.0 : 0.5);
    const zoo::CompoundScaling cs = zoo::compound_scale(a, b, g, phi);
    worst = std::max({worst, std::fabs(cs.depth - std::pow(a, phi)),
                      std::fabs(cs.width - std::pow(b, phi)),
                      std::fabs(cs.resolution - std::pow(g, phi))});
  }
  if (worst > 1e-12) return {false, "compound_scale power law off by " + fmt(worst)};

  nn::Tensor x(4, 5, 6, 0.0);
  for (double& v : x.data) v = 2.0 * rng.next_double() - 1.0;
  const nn::Tensor same = zoo::residual_forward(
      x, [](const nn::Tensor& t) { return nn::Tensor(t.channels, t.height, t.width, 0.0); });
  if (!(same.data == x.data)) return {false, "zero-residual forward is not the identity"};
  const nn::Tensor doubled = zoo::residual_forward(x, [](const nn::Tensor& t) { return t; });
  for (std::size_t i = 0; i < x.data.size(); ++i)
    if (doubled.data[i] != 2.0 * x.data[i]) return {false, "identity residual is not 2x"};

  return {true, "relu6 grid (2e7 points), compound power law (max delta " + fmt(worst) +
                    "), residual identity"};
}

// ---------------------------------------------------------------------------
// Criterion 10 (optional, excluded from CI): full-scale reproduction.

Outcome criterion_full_scale() {
  const char* cfg_path = std::getenv("SIGNFLOW_FULL_RUN_CONFIG");
  if (!cfg_path || !*cfg_path) return {true, ""};  // detail "" marks the skip
  const config::ExperimentConfig cfg = config::load_config(cfg_path);
  pipeline::run(cfg);
  const pipeline::RunPaths paths = pipeline::run_paths(cfg);
  std::ifstream in(paths.fold_reports());
  std::stringstream buf;
  buf << in.rdbuf();
  double best = 0.0;
  for (const report::FoldReport& r : report::fold_reports_from_json(buf.str()))
    if (r.phase == "test") best = std::max(best, r.accuracy);
  double threshold = 0.985;
  if (const char* t = std::getenv("SIGNFLOW_FULL_RUN_MIN_ACC"); t && *t) threshold = std::atof(t);
  if (best < threshold)
    return {false, "best-fold test accuracy " + fmt(best) + " < " + fmt(threshold)};
  return {true, "best-fold test accuracy " + fmt(best) + " >= " + fmt(threshold)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", criterion_metric_oracle},
      {2, "micro identity", criterion_micro_identity},
      {3, "split invariants", criterion_split_invariants},
      {4, "balance invariants", criterion_balance_invariants},
      {5, "preprocessing fidelity", criterion_preprocess_fidelity},
      {6, "grad-cam numerics", criterion_gradcam},
      {7, "scheduler/early-stop simulation", criterion_scheduler},
      {8, "end-to-end smoke", criterion_end_to_end},
      {9, "architecture reference checks", criterion_architecture},
      {10, "full-scale reproduction", criterion_full_scale},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.id == 10 && out.ok && out.detail.empty()) {
      std::printf("[SKIP] criterion 10: full-scale reproduction (set SIGNFLOW_FULL_RUN_CONFIG "
                  "to enable)\n");
      continue;
    }
    if (!out.ok) ++failures;
    std::printf("[%s] criterion %d: %s — %s (%.1fs)\n", out.ok ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs);
  }
  if (failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
