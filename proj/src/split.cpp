#include "signflow/split.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "signflow/errors.hpp"
#include "signflow/log.hpp"
#include "signflow/rng.hpp"

namespace signflow::split {

using ingest::DatasetManifest;
using ingest::SampleRecord;

std::array<std::int64_t, 3> apportion(std::int64_t n, const SplitRatios& ratios) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  std::array<std::int64_t, 3> base{};
  std::array<double, 3> frac{};
  std::int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * r[i];
    base[i] = static_cast<std::int64_t>(std::floor(quota));
    frac[i] = quota - static_cast<double>(base[i]);
    assigned += base[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (std::int64_t left = n - assigned, i = 0; left > 0; --left, ++i) base[order[i % 3]] += 1;
  return base;
}

namespace {

// Canonical per-class sample order: sorted by path. Assignment then depends
// only on the set of sample ids, not on manifest order.
std::map<std::string, std::vector<std::string>> paths_by_class(const DatasetManifest& m) {
  std::map<std::string, std::vector<std::string>> by_class;
  for (const SampleRecord& s : m.samples) by_class[s.label].push_back(s.path);
  for (auto& [cls, paths] : by_class) std::sort(paths.begin(), paths.end());
  return by_class;
}

}  // namespace

SplitAssignment stratified_holdout(const DatasetManifest& m, std::uint64_t seed,
                                   const SplitRatios& ratios, bool allow_small) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split.ratios", "must sum to 1");

  SplitAssignment out;
  out.ratios = ratios;
  out.seed = seed;

  for (auto& [cls, paths] : paths_by_class(m)) {
    const auto n = static_cast<std::int64_t>(paths.size());
    if (n < 10 && !allow_small) {
      throw StratificationError(cls, "class has " + std::to_string(n) +
                                         " samples, need >= 10 for an 80:10:10 split");
    }
    const auto quota = apportion(n, ratios);
    if (allow_small && (quota[0] == 0 || quota[1] == 0 || quota[2] == 0)) {
      log::warn("class '" + cls + "' is too small; some splits receive zero samples of it");
    }
    Rng rng(derive_seed(seed, "split/" + cls));
    rng.shuffle(paths);
    std::int64_t i = 0;
    for (std::int64_t t = 0; t < quota[0]; ++t) out.tag[paths[i++]] = "train";
    for (std::int64_t t = 0; t < quota[1]; ++t) out.tag[paths[i++]] = "val";
    for (std::int64_t t = 0; t < quota[2]; ++t) out.tag[paths[i++]] = "test";
  }
  return out;
}

FoldAssignment stratified_kfold(const DatasetManifest& m, const SplitAssignment& holdout,
                                int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("split.k", "must be >= 2");

  FoldAssignment out;
  out.k = k;
  out.seed = seed;

  for (auto& [cls, all_paths] : paths_by_class(m)) {
    std::vector<std::string> paths;
    for (const std::string& p : all_paths) {
      const auto it = holdout.tag.find(p);
      if (it == holdout.tag.end()) {
        throw StratificationError(cls, "sample missing from holdout assignment: " + p);
      }
      if (it->second != "test") paths.push_back(p);
    }
    if (static_cast<int>(paths.size()) < k) {
      throw StratificationError(cls, "only " + std::to_string(paths.size()) +
                                         " non-test samples for k=" + std::to_string(k));
    }
    Rng rng(derive_seed(seed, "fold/" + cls));
    rng.shuffle(paths);
    // Rotating start fold spreads the +1-sized folds across classes.
    const int start = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
    for (std::size_t j = 0; j < paths.size(); ++j) {
      out.fold[paths[j]] = (start + static_cast<int>(j)) % k;
    }
  }
  return out;
}

FoldSets fold_sets(const DatasetManifest& m, int f) {
  FoldSets sets;
  for (const SampleRecord& s : m.samples) {
    if (s.split == "test" || s.fold < 0) continue;
    (s.fold == f ? sets.val : sets.train).push_back(s);
  }
  if (sets.val.empty())
    throw StratificationError("*", "fold " + std::to_string(f) + " has no validation samples");
  return sets;
}

std::vector<SampleRecord> test_samples(const DatasetManifest& m) {
  std::vector<SampleRecord> out;
  for (const SampleRecord& s : m.samples)
    if (s.split == "test") out.push_back(s);
  return out;
}

DatasetManifest annotate(const DatasetManifest& m, const SplitAssignment& holdout,
                         const FoldAssignment& folds) {
  DatasetManifest out = m;
  for (SampleRecord& s : out.samples) {
    const auto tag_it = holdout.tag.find(s.path);
    if (tag_it == holdout.tag.end()) throw IngestError("sample not in holdout: " + s.path);
    s.split = tag_it->second;
    const auto fold_it = folds.fold.find(s.path);
    s.fold = fold_it == folds.fold.end() ? -1 : fold_it->second;
    if (s.split == "test" && s.fold >= 0) throw IngestError("test sample assigned a fold: " + s.path);
  }
  return out;
}

}  // namespace signflow::split
