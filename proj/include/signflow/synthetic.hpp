#pragma once

#include <cstdint>
#include <filesystem>

namespace signflow::synth {

// Writes a folder-per-class PNG dataset of class-conditional colored blobs on
// a dark noisy background. Classes get evenly spaced saturated hues, so the
// per-image mean color separates them linearly by construction. Class
// directories are named class_00, class_01, ... so sorted order matches the
// generation order.
void generate_dataset(const std::filesystem::path& root, int num_classes, int per_class,
                      std::uint64_t seed, int image_size = 64);

}  // namespace signflow::synth
