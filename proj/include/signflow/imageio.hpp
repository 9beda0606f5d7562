#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "signflow/preprocess.hpp"

namespace signflow::imageio {

// Decodes PNG/JPEG/BMP into an RGB (or single-plane grayscale) tensor with
// values in [0,255]. expect_channels 0 keeps the file's native layout.
prep::ImageTensor decode(const std::filesystem::path& file, int expect_channels = 0);

// Writes an RGB or grayscale tensor with values in [0,255] (rounded to bytes).
void encode(const prep::ImageTensor& img, const std::filesystem::path& file);

// Stamps a small text label onto a [0,255] RGB tensor; (x, y) is the baseline
// left corner and rgb is in [0,255]. Quantizes the tensor to bytes.
void draw_text(prep::ImageTensor& img, const std::string& text, int x, int y, double scale,
               const std::array<double, 3>& rgb);

}  // namespace signflow::imageio
