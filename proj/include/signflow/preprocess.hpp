#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "signflow/rng.hpp"

namespace signflow::prep {

// Dense H x W x C image, row-major, one double per sample. Raw decodes carry
// values in [0,255]; after scale_unit values live in [0,1]; after
// standardization they are unbounded.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
};

struct PreprocessConfig {
  int target_height = 224;
  int target_width = 224;
  std::string channel_policy = "replicate3";   // "replicate3" | "keep"
  std::vector<std::string> augmentation;       // named transforms, empty by default
};

struct NormalizationStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
  std::string source_split = "train";  // stats are never fit on val/test
  std::int64_t sample_count = 0;
};

// Mergeable accumulator (count, sum, sum-of-squares per channel) so parallel
// partial passes combine associatively. Population (1/N) standard deviation.
class StatsAccumulator {
 public:
  void add(const ImageTensor& img);
  void merge(const StatsAccumulator& other);
  NormalizationStats finalize() const;  // throws DegenerateStatsError on zero variance
  std::int64_t images() const { return images_; }

 private:
  std::array<double, 3> sum_{};
  std::array<double, 3> sum_sq_{};
  std::array<std::int64_t, 3> count_{};
  std::int64_t images_ = 0;
  int channels_seen_ = 0;
};

// Bilinear resize with half-pixel centers, no anti-aliasing. Output values are
// clamped to the local 2x2 neighborhood, so constant images resize exactly.
ImageTensor resize(const ImageTensor& img, int out_height, int out_width);

// x / 255 elementwise; input must be within [0,255].
ImageTensor scale_unit(const ImageTensor& img);

// (x - mean) / stddev per channel; expects a unit-scaled image.
ImageTensor standardize(const ImageTensor& img, const NormalizationStats& stats);

// 1 channel -> 3 identical planes. A 3-channel input is returned unchanged
// with a warning.
ImageTensor channel_replicate(const ImageTensor& img);

NormalizationStats fit_stats(const std::vector<ImageTensor>& train_images);

// Rejects unknown transform names (ConfigError at preprocess.augmentation).
void validate_augmentations(const std::vector<std::string>& names);

// Applies the named stochastic transforms to a raw image. Training path only.
ImageTensor apply_augmentations(const ImageTensor& img, const std::vector<std::string>& names,
                                Rng& rng);

// Full pipeline: resize -> scale -> replicate (per policy) -> standardize.
// Pass stats = nullptr to stop after the channel step (used when fitting stats).
ImageTensor run_pipeline(const ImageTensor& raw, const PreprocessConfig& cfg,
                         const NormalizationStats* stats);

}  // namespace signflow::prep
