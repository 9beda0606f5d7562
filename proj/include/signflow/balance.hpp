#pragma once

#include <cstdint>

#include "signflow/manifest.hpp"

namespace signflow::balance {

// Undersampling policy: cap every class at `cap` images, chosen by seeded
// uniform sampling without replacement. Classes at or below the cap pass
// through untouched.
struct BalancePolicy {
  std::int64_t cap = 1250;
  std::uint64_t seed = 0;
};

ingest::DatasetManifest undersample(const ingest::DatasetManifest& m, const BalancePolicy& p);

// Identity policy (the small-dataset path: every sample preserved).
ingest::DatasetManifest passthrough(const ingest::DatasetManifest& m);

}  // namespace signflow::balance
