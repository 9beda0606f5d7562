#include "signflow/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "signflow/errors.hpp"
#include "signflow/log.hpp"

namespace signflow::prep {

namespace {

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

ImageTensor horizontal_flip(const ImageTensor& img) {
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

ImageTensor brightness_jitter(const ImageTensor& img, Rng& rng) {
  const double gain = 1.0 + 0.2 * (rng.next_double() - 0.5);  // +/-10%
  ImageTensor out = img;
  for (double& v : out.data) v = std::clamp(v * gain, 0.0, 255.0);
  return out;
}

}  // namespace

void StatsAccumulator::add(const ImageTensor& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidImageError("stats expect 1 or 3 channels, got " + std::to_string(img.channels));
  }
  channels_seen_ = std::max(channels_seen_, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const double v = img.at(y, x, c);
        sum_[c] += v;
        sum_sq_[c] += v * v;
        ++count_[c];
      }
    }
  }
  ++images_;
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  for (int c = 0; c < 3; ++c) {
    sum_[c] += other.sum_[c];
    sum_sq_[c] += other.sum_sq_[c];
    count_[c] += other.count_[c];
  }
  images_ += other.images_;
  channels_seen_ = std::max(channels_seen_, other.channels_seen_);
}

NormalizationStats StatsAccumulator::finalize() const {
  if (images_ == 0) throw DegenerateStatsError("no images accumulated");
  NormalizationStats s;
  s.sample_count = images_;
  const int ch = channels_seen_;
  for (int c = 0; c < ch; ++c) {
    const double n = static_cast<double>(count_[c]);
    const double mean = sum_[c] / n;
    const double var = std::max(0.0, sum_sq_[c] / n - mean * mean);
    if (var <= 1e-15) {
      throw DegenerateStatsError("channel " + std::to_string(c) +
                                 " has zero variance (mean=" + std::to_string(mean) + ")");
    }
    s.mean[c] = mean;
    s.stddev[c] = std::sqrt(var);
  }
  for (int c = ch; c < 3; ++c) {  // grayscale stream: replicate channel 0
    s.mean[c] = s.mean[0];
    s.stddev[c] = s.stddev[0];
  }
  return s;
}

ImageTensor resize(const ImageTensor& img, int out_height, int out_width) {
  if (img.height < 1 || img.width < 1 || img.channels < 1 || img.data.empty()) {
    throw InvalidImageError("resize input has a zero dimension");
  }
  if (out_height < 1 || out_width < 1) throw InvalidImageError("resize target has a zero dimension");
  if (out_height == img.height && out_width == img.width) return img;

  ImageTensor out(out_height, out_width, img.channels);
  const double sy_scale = static_cast<double>(img.height) / out_height;
  const double sx_scale = static_cast<double>(img.width) / out_width;
  for (int oy = 0; oy < out_height; ++oy) {
    // Clamp the sample coordinate before splitting it, so pixels beyond the
    // border replicate the edge instead of extrapolating.
    const double sy = std::clamp((oy + 0.5) * sy_scale - 0.5, 0.0,
                                 static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (int ox = 0; ox < out_width; ++ox) {
      const double sx = std::clamp((ox + 0.5) * sx_scale - 0.5, 0.0,
                                   static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (int c = 0; c < img.channels; ++c) {
        const double p00 = img.at(y0, x0, c), p01 = img.at(y0, x1, c);
        const double p10 = img.at(y1, x0, c), p11 = img.at(y1, x1, c);
        const double v = lerp(lerp(p00, p01, fx), lerp(p10, p11, fx), fy);
        const double lo = std::min({p00, p01, p10, p11});
        const double hi = std::max({p00, p01, p10, p11});
        out.at(oy, ox, c) = std::clamp(v, lo, hi);
      }
    }
  }
  return out;
}

ImageTensor scale_unit(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data) {
    if (v < 0.0 || v > 255.0) {
      throw InvalidPixelRangeError("pixel value " + std::to_string(v) + " outside [0,255]");
    }
    v /= 255.0;
  }
  return out;
}

ImageTensor standardize(const ImageTensor& img, const NormalizationStats& stats) {
  for (int c = 0; c < std::min(img.channels, 3); ++c) {
    if (!(stats.stddev[c] > 0.0)) throw DegenerateStatsError("stddev must be positive");
  }
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = (img.at(y, x, c) - stats.mean[c]) / stats.stddev[c];
  return out;
}

ImageTensor channel_replicate(const ImageTensor& img) {
  if (img.channels == 3) {
    log::warn("channel_replicate called on a 3-channel image; returning it unchanged");
    return img;
  }
  if (img.channels != 1) {
    throw InvalidImageError("channel_replicate expects 1 channel, got " +
                            std::to_string(img.channels));
  }
  ImageTensor out(img.height, img.width, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double v = img.at(y, x, 0);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v;
      out.at(y, x, 2) = v;
    }
  return out;
}

NormalizationStats fit_stats(const std::vector<ImageTensor>& train_images) {
  StatsAccumulator acc;
  for (const ImageTensor& img : train_images) acc.add(img);
  return acc.finalize();
}

void validate_augmentations(const std::vector<std::string>& names) {
  for (const std::string& name : names) {
    if (name != "horizontal_flip" && name != "brightness_jitter") {
      throw ConfigError("preprocess.augmentation", "unknown transform '" + name + "'");
    }
    if (name == "horizontal_flip") {
      log::warn("horizontal_flip mirrors hand signs and can change their meaning");
    }
  }
}

ImageTensor apply_augmentations(const ImageTensor& img, const std::vector<std::string>& names,
                                Rng& rng) {
  ImageTensor out = img;
  for (const std::string& name : names) {
    if (name == "horizontal_flip") {
      if (rng.next_double() < 0.5) out = horizontal_flip(out);
    } else if (name == "brightness_jitter") {
      out = brightness_jitter(out, rng);
    } else {
      throw ConfigError("preprocess.augmentation", "unknown transform '" + name + "'");
    }
  }
  return out;
}

ImageTensor run_pipeline(const ImageTensor& raw, const PreprocessConfig& cfg,
                         const NormalizationStats* stats) {
  ImageTensor img = resize(raw, cfg.target_height, cfg.target_width);
  img = scale_unit(img);
  if (cfg.channel_policy == "replicate3" && img.channels == 1) {
    img = channel_replicate(img);
  }
  if (stats) img = standardize(img, *stats);
  return img;
}

}  // namespace signflow::prep
