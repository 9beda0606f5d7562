#include "signflow/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "signflow/errors.hpp"
#include "signflow/imageio.hpp"
#include "signflow/preprocess.hpp"
#include "signflow/rng.hpp"

namespace signflow::synth {

namespace {

std::array<double, 3> hue_to_rgb(double hue) {
  // Full-saturation, full-value HSV wheel.
  const double h = hue * 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  switch (sector) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

}  // namespace

void generate_dataset(const std::filesystem::path& root, int num_classes, int per_class,
                      std::uint64_t seed, int image_size) {
  if (num_classes < 2) throw ShapeError("synthetic dataset needs >= 2 classes");
  if (per_class < 1) throw ShapeError("synthetic dataset needs >= 1 image per class");
  if (image_size < 8) throw ShapeError("synthetic images must be >= 8 px");
  std::filesystem::create_directories(root);

  for (int cls = 0; cls < num_classes; ++cls) {
    char name[16];
    std::snprintf(name, sizeof(name), "class_%02d", cls);
    const std::filesystem::path dir = root / name;
    std::filesystem::create_directories(dir);
    Rng rng(derive_seed(seed, std::string("synthetic/") + name));
    const auto base = hue_to_rgb(static_cast<double>(cls) / num_classes);

    for (int i = 0; i < per_class; ++i) {
      prep::ImageTensor img(image_size, image_size, 3);
      for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x)
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = rng.next_double() * 40.0;

      const double cx = image_size * (0.5 + 0.1 * (rng.next_double() - 0.5));
      const double cy = image_size * (0.5 + 0.1 * (rng.next_double() - 0.5));
      const double radius = image_size * (0.26 + 0.08 * rng.next_double());
      for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
          const double dx = x - cx, dy = y - cy;
          if (dx * dx + dy * dy > radius * radius) continue;
          for (int c = 0; c < 3; ++c) {
            const double v = base[c] * 255.0 + 30.0 * (rng.next_double() - 0.5);
            img.at(y, x, c) = std::clamp(v, 0.0, 255.0);
          }
        }
      }
      char file[24];
      std::snprintf(file, sizeof(file), "img_%04d.png", i);
      imageio::encode(img, dir / file);
    }
  }
}

}  // namespace signflow::synth
