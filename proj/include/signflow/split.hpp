#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "signflow/manifest.hpp"

namespace signflow::split {

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Holdout assignment, keyed by sample path so the result is independent of
// manifest order.
struct SplitAssignment {
  std::map<std::string, std::string> tag;  // path -> "train" | "val" | "test"
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

// Cross-validation assignment over the train+val portion. The test portion is
// frozen by the holdout and never enters any fold.
struct FoldAssignment {
  int k = 5;
  std::map<std::string, int> fold;  // path -> 0..k-1
  std::uint64_t seed = 0;
};

// Stratified holdout via largest-remainder apportionment of the ratios within
// each class. Classes with fewer than 10 samples make the ratios unrealizable
// and throw StratificationError unless allow_small is set (then a split may
// receive zero samples of that class, which is logged).
SplitAssignment stratified_holdout(const ingest::DatasetManifest& m, std::uint64_t seed,
                                   const SplitRatios& ratios = {}, bool allow_small = false);

// Stratified k-fold over the holdout's train+val portion. Per class, fold
// sizes differ by at most one. A class smaller than k in the folded portion
// throws StratificationError.
FoldAssignment stratified_kfold(const ingest::DatasetManifest& m, const SplitAssignment& holdout,
                                int k, std::uint64_t seed);

// Returns a copy of the manifest with split tags and fold indices written
// into the sample records (fold stays unset for test samples).
ingest::DatasetManifest annotate(const ingest::DatasetManifest& m, const SplitAssignment& holdout,
                                 const FoldAssignment& folds);

// Largest-remainder apportionment of n into parts proportional to ratios.
// Deterministic: remainder ties resolve in ratio order. Exposed for tests.
std::array<std::int64_t, 3> apportion(std::int64_t n, const SplitRatios& ratios);

// Per-fold subsets of an annotated manifest: validation = samples assigned to
// fold f, training = every other folded sample. Test samples never appear.
struct FoldSets {
  std::vector<ingest::SampleRecord> train;
  std::vector<ingest::SampleRecord> val;
};
FoldSets fold_sets(const ingest::DatasetManifest& m, int f);

std::vector<ingest::SampleRecord> test_samples(const ingest::DatasetManifest& m);

}  // namespace signflow::split
