#pragma once

#include <vector>

namespace svaesr::kernels {

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Fixed-width 1D filter bank: output i reads `taps` inputs starting at
/// index[i * taps], already reflected into [0, in).
struct ResampleTaps {
  int in = 0;
  int out = 0;
  int taps = 0;
  std::vector<int> index;
  std::vector<double> weight;
};

/// Bicubic taps with half-pixel-center alignment. When shrinking with
/// antialias on, the kernel is stretched by 1/scale; weights are normalized to
/// sum to one and borders use symmetric reflection.
ResampleTaps make_bicubic_taps(int in, int out, bool antialias);

/// Separable resample of one plane: horizontal pass, then vertical.
void resample_plane(const float* src, float* dst, int h, int w, const ResampleTaps& rows,
                    const ResampleTaps& cols);

/// Sum of squared differences over the window [top, top+h) x [left, left+w)
/// of two planes with row stride `stride`.
double squared_error_sum(const float* a, const float* b, int stride, int top, int left, int h,
                         int w);

namespace serial {

void resample_plane(const float* src, float* dst, int h, int w, const ResampleTaps& rows,
                    const ResampleTaps& cols);
double squared_error_sum(const float* a, const float* b, int stride, int top, int left, int h,
                         int w);

}  // namespace serial

}  // namespace svaesr::kernels
