#include "signflow/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace signflow::ingest {

namespace {

bool accepted_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::string iso8601_utc(fs::file_time_type tp) {
  // gcc 11 has no chrono::clock_cast; file_clock::to_sys is the same bridge.
  const auto sys = fs::file_time_type::clock::to_sys(tp);
  const std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::time_point_cast<std::chrono::system_clock::duration>(sys));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

DatasetManifest build_manifest(const fs::path& root, const std::string& dataset_name,
                               BuildSummary* summary) {
  if (!fs::is_directory(root)) throw DatasetNotFoundError(root.string());

  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  if (classes.empty()) throw EmptyDatasetError(root.string());
  std::sort(classes.begin(), classes.end());  // byte order == code-point order for UTF-8

  DatasetManifest m;
  m.dataset_name = dataset_name;
  m.root = root.string();
  m.classes = classes;

  BuildSummary local;
  BuildSummary& sum = summary ? *summary : local;
  std::int64_t attempted = 0;
  fs::file_time_type newest{};

  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const fs::path class_dir = root / classes[ci];
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      const std::string name = entry.path().filename().string();
      if (!name.empty() && name.front() == '.') continue;
      if (!entry.is_regular_file()) {
        log::warn("ignoring non-file entry " + entry.path().string());
        continue;
      }
      if (!accepted_extension(entry.path())) {
        sum.skipped_unsupported.push_back((fs::path(classes[ci]) / name).generic_string());
        log::warn("skipping unsupported file " + entry.path().string());
        continue;
      }
      names.push_back(name);
    }
    std::sort(names.begin(), names.end());

    std::int64_t decoded_here = 0;
    for (const std::string& name : names) {
      const fs::path file = class_dir / name;
      ++attempted;
      const cv::Mat img = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
      if (img.empty()) {
        sum.skipped_undecodable.push_back((fs::path(classes[ci]) / name).generic_string());
        log::warn("skipping undecodable image " + file.string());
        continue;
      }
      SampleRecord rec;
      rec.path = (fs::path(classes[ci]) / name).generic_string();
      rec.label = classes[ci];
      rec.label_index = static_cast<int>(ci);
      rec.width = img.cols;
      rec.height = img.rows;
      rec.channels = img.channels() == 1 ? 1 : 3;
      m.samples.push_back(std::move(rec));
      ++decoded_here;
      const auto mtime = fs::last_write_time(file);
      if (mtime > newest) newest = mtime;
    }
    if (decoded_here == 0) throw EmptyClassError(classes[ci]);
  }

  sum.decoded = static_cast<std::int64_t>(m.samples.size());
  const auto skipped = static_cast<std::int64_t>(sum.skipped_undecodable.size());
  if (attempted > 0 && skipped * 100 > attempted) {
    throw IngestError("more than 1% of files failed to decode (" + std::to_string(skipped) +
                      " of " + std::to_string(attempted) + ")");
  }

  m.created_at = iso8601_utc(newest);
  return m;
}

ClassDistribution class_distribution(const DatasetManifest& m) {
  if (m.samples.empty()) throw EmptyDatasetError(m.root);
  ClassDistribution d;
  for (const std::string& c : m.classes) d.counts[c] = 0;
  for (const SampleRecord& s : m.samples) {
    ++d.counts[s.label];
    ++d.total;
  }
  std::int64_t lo = d.total, hi = 0;
  for (const auto& [name, n] : d.counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  d.imbalance_ratio = lo > 0 ? static_cast<double>(hi) / static_cast<double>(lo)
                             : std::numeric_limits<double>::infinity();
  return d;
}

std::string to_json(const DatasetManifest& m) {
  json j;
  j["dataset_name"] = m.dataset_name;
  j["root"] = m.root;
  j["classes"] = m.classes;
  j["created_at"] = m.created_at;
  if (m.seed) {
    j["seed"] = *m.seed;
  } else {
    j["seed"] = nullptr;
  }
  if (!m.config_hash.empty()) j["config_hash"] = m.config_hash;
  json samples = json::array();
  for (const SampleRecord& s : m.samples) {
    json r;
    r["path"] = s.path;
    r["label"] = s.label;
    r["label_index"] = s.label_index;
    r["width"] = s.width;
    r["height"] = s.height;
    r["channels"] = s.channels;
    if (!s.split.empty()) r["split"] = s.split;
    if (s.fold >= 0) r["fold"] = s.fold;
    samples.push_back(std::move(r));
  }
  j["samples"] = std::move(samples);
  return j.dump(2) + "\n";
}

namespace {

DatasetManifest manifest_from_json_impl(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.dataset_name = j.at("dataset_name").get<std::string>();
  m.root = j.at("root").get<std::string>();
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.created_at = j.at("created_at").get<std::string>();
  if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("config_hash")) m.config_hash = j.at("config_hash").get<std::string>();
  for (const json& r : j.at("samples")) {
    SampleRecord s;
    s.path = r.at("path").get<std::string>();
    s.label = r.at("label").get<std::string>();
    s.label_index = r.at("label_index").get<int>();
    s.width = r.at("width").get<int>();
    s.height = r.at("height").get<int>();
    s.channels = r.at("channels").get<int>();
    if (r.contains("split")) s.split = r.at("split").get<std::string>();
    if (r.contains("fold")) s.fold = r.at("fold").get<int>();
    m.samples.push_back(std::move(s));
  }
  return m;
}

}  // namespace

DatasetManifest manifest_from_json(const std::string& text) {
  try {
    return manifest_from_json_impl(text);
  } catch (const json::exception& e) {
    throw IngestError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest& m, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write manifest: " + file.string());
  out << to_json(m);
}

DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read manifest: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return manifest_from_json(buf.str());
  } catch (const IngestError& e) {
    throw IoError("cannot parse manifest " + file.string() + ": " + e.what());
  }
}

}  // namespace signflow::ingest
