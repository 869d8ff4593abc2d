#include "svaesr/kernels/dense.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace svaesr::kernels {

namespace {

constexpr long kParallelWork = 1L << 15;

template <typename T>
void matmul_nn_rows(const T* __restrict x, const T* __restrict m, const T* __restrict bias,
                    T* __restrict y, int row_begin, int row_end, int k, int o, bool accumulate) {
  for (int i = row_begin; i < row_end; ++i) {
    T* __restrict yr = y + static_cast<std::ptrdiff_t>(i) * o;
    if (!accumulate) {
      if (bias)
        std::copy(bias, bias + o, yr);
      else
        std::fill(yr, yr + o, T(0));
    }
    const T* xr = x + static_cast<std::ptrdiff_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const T a = xr[kk];
      if (a == T(0)) continue;
      const T* __restrict mr = m + static_cast<std::ptrdiff_t>(kk) * o;
#pragma omp simd
      for (int j = 0; j < o; ++j) yr[j] += a * mr[j];
    }
  }
}

template <typename T>
void matmul_tn_rows(const T* __restrict a, const T* __restrict b, T* __restrict c, int n,
                    int k_begin, int k_end, int k, int o) {
  for (int kk = k_begin; kk < k_end; ++kk) {
    T* __restrict cr = c + static_cast<std::ptrdiff_t>(kk) * o;
    for (int i = 0; i < n; ++i) {
      const T s = a[static_cast<std::ptrdiff_t>(i) * k + kk];
      if (s == T(0)) continue;
      const T* __restrict br = b + static_cast<std::ptrdiff_t>(i) * o;
#pragma omp simd
      for (int j = 0; j < o; ++j) cr[j] += s * br[j];
    }
  }
}

template <typename T>
void im2col_rows(const T* in, T* col, int y_begin, int y_end, int h, int w, int c) {
  const int row_len = 9 * c;
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = 0; x < w; ++x) {
      T* dst = col + (static_cast<std::ptrdiff_t>(y) * w + x) * row_len;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        for (int kx = 0; kx < 3; ++kx, dst += c) {
          const int sx = x + kx - 1;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            std::fill(dst, dst + c, T(0));
          } else {
            const T* src = in + (static_cast<std::ptrdiff_t>(sy) * w + sx) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_rows(const T* col, T* in, int y_begin, int y_end, int h, int w, int c) {
  const int row_len = 9 * c;
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = 0; x < w; ++x) {
      T* dst = in + (static_cast<std::ptrdiff_t>(y) * w + x) * c;
      std::fill(dst, dst + c, T(0));
      // Pixel (y, x) is tap (ky, kx) of output pixel (y - ky + 1, x - kx + 1).
      for (int ky = 0; ky < 3; ++ky) {
        const int py = y - ky + 1;
        if (py < 0 || py >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int px = x - kx + 1;
          if (px < 0 || px >= w) continue;
          const T* src =
              col + (static_cast<std::ptrdiff_t>(py) * w + px) * row_len + (ky * 3 + kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

// Splits [0, total) into contiguous static blocks, one per thread.
template <typename Fn>
void parallel_blocks(int total, long work, Fn&& fn) {
#ifdef _OPENMP
  if (work >= kParallelWork && total > 1 && !omp_in_parallel()) {
#pragma omp parallel
    {
      const int threads = omp_get_num_threads();
      const int id = omp_get_thread_num();
      const int chunk = (total + threads - 1) / threads;
      const int begin = std::min(total, id * chunk);
      const int end = std::min(total, begin + chunk);
      if (begin < end) fn(begin, end);
    }
    return;
  }
#endif
  (void)work;
  fn(0, total);
}

}  // namespace

template <typename T>
void matmul_nn(const T* x, const T* m, const T* bias, T* y, int n, int k, int o,
               bool accumulate) {
  parallel_blocks(n, static_cast<long>(n) * k * o, [&](int b, int e) {
    matmul_nn_rows(x, m, bias, y, b, e, k, o, accumulate);
  });
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int n, int k, int o) {
  parallel_blocks(k, static_cast<long>(n) * k * o,
                  [&](int kb, int ke) { matmul_tn_rows(a, b, c, n, kb, ke, k, o); });
}

template <typename T>
void transpose(const T* src, T* dst, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      dst[static_cast<std::ptrdiff_t>(c) * rows + r] = src[static_cast<std::ptrdiff_t>(r) * cols + c];
}

template <typename T>
void im2col3x3(const T* in, T* col, int h, int w, int c) {
  parallel_blocks(h, static_cast<long>(h) * w * c * 9,
                  [&](int b, int e) { im2col_rows(in, col, b, e, h, w, c); });
}

template <typename T>
void col2im3x3(const T* col, T* in, int h, int w, int c) {
  parallel_blocks(h, static_cast<long>(h) * w * c * 9,
                  [&](int b, int e) { col2im_rows(col, in, b, e, h, w, c); });
}

namespace serial {

template <typename T>
void matmul_nn(const T* x, const T* m, const T* bias, T* y, int n, int k, int o,
               bool accumulate) {
  matmul_nn_rows(x, m, bias, y, 0, n, k, o, accumulate);
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int n, int k, int o) {
  matmul_tn_rows(a, b, c, n, 0, k, k, o);
}

template <typename T>
void im2col3x3(const T* in, T* col, int h, int w, int c) {
  im2col_rows(in, col, 0, h, h, w, c);
}

template <typename T>
void col2im3x3(const T* col, T* in, int h, int w, int c) {
  col2im_rows(col, in, 0, h, h, w, c);
}

}  // namespace serial

#define SVAESR_INSTANTIATE_DENSE(T)                                                        \
  template void matmul_nn<T>(const T*, const T*, const T*, T*, int, int, int, bool);       \
  template void matmul_tn_acc<T>(const T*, const T*, T*, int, int, int);                  \
  template void transpose<T>(const T*, T*, int, int);                                      \
  template void im2col3x3<T>(const T*, T*, int, int, int);                                 \
  template void col2im3x3<T>(const T*, T*, int, int, int);                                 \
  template void serial::matmul_nn<T>(const T*, const T*, const T*, T*, int, int, int, bool); \
  template void serial::matmul_tn_acc<T>(const T*, const T*, T*, int, int, int);          \
  template void serial::im2col3x3<T>(const T*, T*, int, int, int);                         \
  template void serial::col2im3x3<T>(const T*, T*, int, int, int);

SVAESR_INSTANTIATE_DENSE(float)
SVAESR_INSTANTIATE_DENSE(double)

}  // namespace svaesr::kernels
