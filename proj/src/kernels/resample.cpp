#include "svaesr/kernels/resample.hpp"

#include <cmath>
#include <vector>

namespace svaesr::kernels {

double cubic_kernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax < 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

namespace {

int reflect(int j, int n) {
  const int period = 2 * n;
  j %= period;
  if (j < 0) j += period;
  return j < n ? j : period - 1 - j;
}

void horizontal_rows(const float* src, double* tmp, int y_begin, int y_end, int w,
                     const ResampleTaps& cols) {
  for (int y = y_begin; y < y_end; ++y) {
    const float* row = src + static_cast<std::ptrdiff_t>(y) * w;
    double* out = tmp + static_cast<std::ptrdiff_t>(y) * cols.out;
    for (int x = 0; x < cols.out; ++x) {
      const int* idx = cols.index.data() + static_cast<std::ptrdiff_t>(x) * cols.taps;
      const double* wt = cols.weight.data() + static_cast<std::ptrdiff_t>(x) * cols.taps;
      double acc = 0.0;
      for (int t = 0; t < cols.taps; ++t) acc += wt[t] * row[idx[t]];
      out[x] = acc;
    }
  }
}

void vertical_rows(const double* tmp, float* dst, int y_begin, int y_end, int ow,
                   const ResampleTaps& rows, std::vector<double>& acc) {
  acc.resize(ow);
  for (int y = y_begin; y < y_end; ++y) {
    const int* idx = rows.index.data() + static_cast<std::ptrdiff_t>(y) * rows.taps;
    const double* wt = rows.weight.data() + static_cast<std::ptrdiff_t>(y) * rows.taps;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int t = 0; t < rows.taps; ++t) {
      const double* in = tmp + static_cast<std::ptrdiff_t>(idx[t]) * ow;
      for (int x = 0; x < ow; ++x) acc[x] += wt[t] * in[x];
    }
    float* out = dst + static_cast<std::ptrdiff_t>(y) * ow;
    for (int x = 0; x < ow; ++x) out[x] = static_cast<float>(acc[x]);
  }
}

double row_squared_error(const float* a, const float* b, int w) {
  double acc = 0.0;
  for (int x = 0; x < w; ++x) {
    const double d = static_cast<double>(a[x]) - static_cast<double>(b[x]);
    acc += d * d;
  }
  return acc;
}

}  // namespace

ResampleTaps make_bicubic_taps(int in, int out, bool antialias) {
  ResampleTaps taps;
  taps.in = in;
  taps.out = out;
  const double scale = static_cast<double>(out) / in;
  const double kscale = (antialias && scale < 1.0) ? scale : 1.0;
  const double width = 4.0 / kscale;
  taps.taps = static_cast<int>(std::ceil(width)) + 2;
  taps.index.resize(static_cast<std::size_t>(out) * taps.taps);
  taps.weight.resize(taps.index.size());
  for (int i = 0; i < out; ++i) {
    const double u = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double sum = 0.0;
    for (int t = 0; t < taps.taps; ++t) {
      const int j = left + t;
      const double wgt = kscale * cubic_kernel(kscale * (u - j));
      taps.index[static_cast<std::size_t>(i) * taps.taps + t] = reflect(j, in);
      taps.weight[static_cast<std::size_t>(i) * taps.taps + t] = wgt;
      sum += wgt;
    }
    for (int t = 0; t < taps.taps; ++t) taps.weight[static_cast<std::size_t>(i) * taps.taps + t] /= sum;
  }
  return taps;
}

void resample_plane(const float* src, float* dst, int h, int w, const ResampleTaps& rows,
                    const ResampleTaps& cols) {
  std::vector<double> tmp(static_cast<std::size_t>(h) * cols.out);
#pragma omp parallel for schedule(static) if (h * cols.out > 4096)
  for (int y = 0; y < h; ++y) horizontal_rows(src, tmp.data(), y, y + 1, w, cols);
#pragma omp parallel if (rows.out * cols.out > 4096)
  {
    std::vector<double> acc;
#pragma omp for schedule(static)
    for (int y = 0; y < rows.out; ++y) vertical_rows(tmp.data(), dst, y, y + 1, cols.out, rows, acc);
  }
}

double squared_error_sum(const float* a, const float* b, int stride, int top, int left, int h,
                         int w) {
  std::vector<double> per_row(h);
#pragma omp parallel for schedule(static) if (h * w > 16384)
  for (int y = 0; y < h; ++y) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(top + y) * stride + left;
    per_row[y] = row_squared_error(a + off, b + off, w);
  }
  double total = 0.0;
  for (double r : per_row) total += r;
  return total;
}

namespace serial {

void resample_plane(const float* src, float* dst, int h, int w, const ResampleTaps& rows,
                    const ResampleTaps& cols) {
  std::vector<double> tmp(static_cast<std::size_t>(h) * cols.out);
  std::vector<double> acc;
  horizontal_rows(src, tmp.data(), 0, h, w, cols);
  vertical_rows(tmp.data(), dst, 0, rows.out, cols.out, rows, acc);
}

double squared_error_sum(const float* a, const float* b, int stride, int top, int left, int h,
                         int w) {
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(top + y) * stride + left;
    total += row_squared_error(a + off, b + off, w);
  }
  return total;
}

}  // namespace serial

}  // namespace svaesr::kernels
