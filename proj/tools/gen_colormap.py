#!/usr/bin/env python3
"""Regenerates src/colormap.cpp (the committed 256-entry viridis table).

The table is committed rather than computed at runtime so heatmap renderings
stay bit-identical regardless of which plotting stack is installed.
"""
import pathlib

import matplotlib

TEMPLATE = """#include "signflow/colormap.hpp"

namespace signflow::gradcam {{

// 256-entry perceptually ordered lookup table (viridis); regenerate with
// tools/gen_colormap.py if it ever needs to change.
const ColormapTable& heat_colormap() {{
  static const ColormapTable table{{{{
{body}
  }}}};
  return table;
}}

}}  // namespace signflow::gradcam
"""


def main() -> None:
    cmap = matplotlib.colormaps.get_cmap("viridis").resampled(256)
    rows = []
    for i in range(256):
        r, g, b, _ = cmap(i)
        rows.append(f"    {{{r:.6f}, {g:.6f}, {b:.6f}}},")
    out = pathlib.Path(__file__).resolve().parent.parent / "src" / "colormap.cpp"
    out.write_text(TEMPLATE.format(body="\n".join(rows)))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
