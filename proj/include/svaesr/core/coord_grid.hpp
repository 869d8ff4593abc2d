#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace svaesr {

/// Query coordinates in the normalized [-1, 1]^2 square, (row, column) order,
/// each paired with the footprint of the pixel it stands for.
struct CoordGrid {
  std::vector<std::array<double, 2>> coords;
  std::vector<std::array<double, 2>> cells;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
  void push_back(std::array<double, 2> coord, std::array<double, 2> cell) {
    coords.push_back(coord);
    cells.push_back(cell);
  }
};

/// Normalized center of pixel `index` along an axis of `length` pixels.
inline double pixel_center(int index, int length) {
  return -1.0 + (2.0 * index + 1.0) / length;
}

/// Pixel-center grid of an h x w image in row-major order; every cell is (2/h, 2/w).
CoordGrid make_coord_grid(int h, int w);

}  // namespace svaesr
