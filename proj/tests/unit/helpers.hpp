#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "signflow/manifest.hpp"
#include "signflow/rng.hpp"

namespace testutil {

// Self-deleting scratch directory.
class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "signflow_test_XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random manifest with fake paths; samples are class-major like the ingester
// produces. Class sizes are uniform in [min_size, max_size].
inline signflow::ingest::DatasetManifest random_manifest(signflow::Rng& rng, int num_classes,
                                                         int min_size, int max_size) {
  signflow::ingest::DatasetManifest m;
  m.dataset_name = "random";
  m.root = "/nonexistent";
  for (int c = 0; c < num_classes; ++c) {
    char name[16];
    std::snprintf(name, sizeof(name), "class_%02d", c);
    m.classes.push_back(name);
  }
  for (int c = 0; c < num_classes; ++c) {
    const int size =
        min_size + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                       max_size - min_size + 1)));
    for (int i = 0; i < size; ++i) {
      signflow::ingest::SampleRecord s;
      s.path = m.classes[c] + "/img_" + std::to_string(i) + ".png";
      s.label = m.classes[c];
      s.label_index = c;
      s.width = 64;
      s.height = 64;
      s.channels = 3;
      m.samples.push_back(s);
    }
  }
  return m;
}

}  // namespace testutil
