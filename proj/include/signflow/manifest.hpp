#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace signflow::ingest {

// One image in a dataset. `path` is relative to the manifest root, with '/'
// separators regardless of platform. `split` and `fold` stay unset until the
// split module annotates the manifest.
struct SampleRecord {
  std::string path;
  std::string label;
  int label_index = 0;
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3

  std::string split;  // "", "train", "val", "test"
  int fold = -1;      // -1 = unassigned

  bool operator==(const SampleRecord&) const = default;
};

struct DatasetManifest {
  std::string dataset_name;
  std::string root;
  std::vector<std::string> classes;  // unique, sorted by Unicode code point
  std::vector<SampleRecord> samples;
  std::string created_at;  // ISO-8601 UTC, derived from newest ingested file
  std::optional<std::uint64_t> seed;
  std::string config_hash;  // set on pipeline-emitted manifests, else empty

  bool operator==(const DatasetManifest&) const = default;
};

struct ClassDistribution {
  std::map<std::string, std::int64_t> counts;
  std::int64_t total = 0;
  double imbalance_ratio = 1.0;  // max count / min count
};

struct BuildSummary {
  std::int64_t decoded = 0;
  std::vector<std::string> skipped_undecodable;   // accepted extension, failed to decode
  std::vector<std::string> skipped_unsupported;   // extension outside png/jpeg/bmp
};

// Walks root (one subdirectory per class) into a manifest. Classes are sorted
// lexicographically; samples are ordered class-major then filename-sorted.
// Undecodable files are skipped and counted; more than 1% of them fails the
// build. Throws EmptyDatasetError / EmptyClassError / IngestError.
DatasetManifest build_manifest(const std::filesystem::path& root,
                               const std::string& dataset_name,
                               BuildSummary* summary = nullptr);

ClassDistribution class_distribution(const DatasetManifest& m);

// JSON serialization. Field names and record order are part of the format.
std::string to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

}  // namespace signflow::ingest
