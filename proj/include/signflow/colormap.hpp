#pragma once

#include <array>

namespace signflow::gradcam {

// RGB triples in [0,1], index 0 = coldest, 255 = hottest.
using ColormapTable = std::array<std::array<double, 3>, 256>;

// Fixed perceptually ordered colormap used for every heatmap rendering, so
// overlays are bit-reproducible across machines. Table generated by
// tools/gen_colormap.py and committed.
const ColormapTable& heat_colormap();

}  // namespace signflow::gradcam
