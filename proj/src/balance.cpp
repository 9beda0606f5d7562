#include "signflow/balance.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "signflow/errors.hpp"
#include "signflow/rng.hpp"

namespace signflow::balance {

using ingest::DatasetManifest;
using ingest::SampleRecord;

DatasetManifest undersample(const DatasetManifest& m, const BalancePolicy& p) {
  if (m.samples.empty()) throw EmptyDatasetError(m.root);
  if (p.cap < 1) throw ConfigError("balance.cap", "must be >= 1");

  std::map<std::string, std::vector<const SampleRecord*>> by_class;
  for (const SampleRecord& s : m.samples) by_class[s.label].push_back(&s);

  DatasetManifest out;
  out.dataset_name = m.dataset_name;
  out.root = m.root;
  out.classes = m.classes;
  out.created_at = m.created_at;
  out.seed = p.seed;

  for (const std::string& cls : m.classes) {
    auto it = by_class.find(cls);
    if (it == by_class.end()) continue;
    std::vector<const SampleRecord*>& records = it->second;
    if (static_cast<std::int64_t>(records.size()) > p.cap) {
      // Per-class generator keyed on (seed, class) so class order is irrelevant.
      Rng rng(derive_seed(p.seed, "balance/" + cls));
      std::vector<std::size_t> order(records.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      order.resize(static_cast<std::size_t>(p.cap));
      std::sort(order.begin(), order.end());  // keep filename-sorted output order
      std::vector<const SampleRecord*> kept;
      kept.reserve(order.size());
      for (const std::size_t i : order) kept.push_back(records[i]);
      records = std::move(kept);
    }
    for (const SampleRecord* r : records) out.samples.push_back(*r);
  }
  return out;
}

DatasetManifest passthrough(const DatasetManifest& m) { return m; }

}  // namespace signflow::balance
