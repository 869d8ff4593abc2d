#include "svaesr/core/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "svaesr/core/error.hpp"
#include "svaesr/kernels/resample.hpp"

namespace svaesr {

double psnr(const ImageTensor& a, const ImageTensor& b, int border_crop) {
  SVAESR_REQUIRE(a.same_shape(b), "psnr: image shapes differ");
  SVAESR_REQUIRE(a.range() == b.range(), "psnr: value ranges differ");
  SVAESR_REQUIRE(border_crop >= 0, "psnr: negative border crop");
  const int h = a.height() - 2 * border_crop;
  const int w = a.width() - 2 * border_crop;
  SVAESR_REQUIRE(h >= 1 && w >= 1, "psnr: border crop removes the whole image");
  double sse = 0.0;
  for (int c = 0; c < a.channels(); ++c)
    sse += kernels::squared_error_sum(a.plane(c).data(), b.plane(c).data(), a.width(), border_crop,
                                      border_crop, h, w);
  const double mse = sse / (static_cast<double>(h) * w * a.channels());
  if (mse <= 0.0) return kPsnrCap;
  const double peak = range_width(a.range());
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace svaesr
