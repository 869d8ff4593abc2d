#include "svaesr/core/coord_grid.hpp"

#include "svaesr/core/error.hpp"

namespace svaesr {

CoordGrid make_coord_grid(int h, int w) {
  SVAESR_REQUIRE(h >= 1 && w >= 1, "coordinate grid dimensions must be positive");
  CoordGrid grid;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  grid.coords.reserve(n);
  grid.cells.assign(n, {2.0 / h, 2.0 / w});
  for (int i = 0; i < h; ++i) {
    const double cy = pixel_center(i, h);
    for (int j = 0; j < w; ++j) grid.coords.push_back({cy, pixel_center(j, w)});
  }
  return grid;
}

}  // namespace svaesr
