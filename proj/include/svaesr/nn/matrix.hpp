#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace svaesr::nn {

/// Row-major rows x cols buffer; the working type for activations and caches.
template <typename T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c, T fill = T(0)) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.assign(static_cast<std::size_t>(r) * c, T(0));
  }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  T* row(int r) { return data.data() + static_cast<std::ptrdiff_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<std::ptrdiff_t>(r) * cols; }
  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  T operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
};

}  // namespace svaesr::nn
