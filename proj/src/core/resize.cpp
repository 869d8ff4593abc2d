#include "svaesr/core/resize.hpp"

#include <cmath>

#include "svaesr/core/error.hpp"
#include "svaesr/kernels/resample.hpp"

namespace svaesr {

namespace {

template <typename PlaneFn>
ImageTensor resize_with(const ImageTensor& img, int out_h, int out_w, bool antialias,
                        PlaneFn&& plane_fn) {
  SVAESR_REQUIRE(!img.empty(), "cannot resize an empty image");
  SVAESR_REQUIRE(out_h >= 1 && out_w >= 1, "resize output must be at least 1x1");
  const auto rows = kernels::make_bicubic_taps(img.height(), out_h, antialias);
  const auto cols = kernels::make_bicubic_taps(img.width(), out_w, antialias);
  ImageTensor out(img.channels(), out_h, out_w, img.range());
  out.set_color_space(img.color_space());
  for (int c = 0; c < img.channels(); ++c)
    plane_fn(img.plane(c).data(), out.plane(c).data(), img.height(), img.width(), rows, cols);
  out.clamp_to_range();
  return out;
}

}  // namespace

ImageTensor bicubic_resize(const ImageTensor& img, double scale, bool antialias) {
  SVAESR_REQUIRE(scale > 0.0 && std::isfinite(scale), "resize scale must be positive");
  const long out_h = std::lround(img.height() * scale);
  const long out_w = std::lround(img.width() * scale);
  SVAESR_REQUIRE(out_h >= 1 && out_w >= 1, "resize scale produces a degenerate image");
  return bicubic_resize_to(img, static_cast<int>(out_h), static_cast<int>(out_w), antialias);
}

ImageTensor bicubic_resize_to(const ImageTensor& img, int out_h, int out_w, bool antialias) {
  return resize_with(img, out_h, out_w, antialias,
                     [](auto... args) { kernels::resample_plane(args...); });
}

namespace serial {

ImageTensor bicubic_resize_to(const ImageTensor& img, int out_h, int out_w, bool antialias) {
  return resize_with(img, out_h, out_w, antialias,
                     [](auto... args) { kernels::serial::resample_plane(args...); });
}

}  // namespace serial

}  // namespace svaesr
