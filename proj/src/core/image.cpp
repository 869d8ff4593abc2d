#include "svaesr/core/image.hpp"

#include <algorithm>
#include <cmath>

#include "svaesr/core/error.hpp"

namespace svaesr {

double range_width(ValueRange range) { return range == ValueRange::kUnit ? 1.0 : 2.0; }

namespace {

float range_lo(ValueRange r) { return r == ValueRange::kUnit ? 0.0f : -1.0f; }

}  // namespace

ImageTensor::ImageTensor(int channels, int height, int width, ValueRange range, float fill)
    : channels_(channels), height_(height), width_(width), range_(range) {
  SVAESR_REQUIRE(channels == 1 || channels == 3, "image must have 1 or 3 channels");
  SVAESR_REQUIRE(height >= 1 && width >= 1, "image dimensions must be positive");
  color_ = channels == 1 ? ColorSpace::kY : ColorSpace::kRGB;
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

bool ImageTensor::in_range() const {
  const float lo = range_lo(range_);
  return std::all_of(data_.begin(), data_.end(),
                     [lo](float v) { return v >= lo && v <= 1.0f; });
}

void ImageTensor::clamp_to_range() {
  const float lo = range_lo(range_);
  for (float& v : data_) v = std::clamp(v, lo, 1.0f);
}

ImageTensor to_signed(const ImageTensor& img) {
  if (img.range() == ValueRange::kSigned) return img;
  ImageTensor out(img.channels(), img.height(), img.width(), ValueRange::kSigned);
  out.set_color_space(img.color_space());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * 2.0f - 1.0f;
  return out;
}

ImageTensor to_unit(const ImageTensor& img) {
  if (img.range() == ValueRange::kUnit) return img;
  ImageTensor out(img.channels(), img.height(), img.width(), ValueRange::kUnit);
  out.set_color_space(img.color_space());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] + 1.0f) * 0.5f;
  return out;
}

ImageTensor to_rgb(const ImageTensor& img) {
  if (img.channels() == 3) return img;
  ImageTensor out(3, img.height(), img.width(), img.range());
  for (int c = 0; c < 3; ++c) std::ranges::copy(img.plane(0), out.plane(c).begin());
  return out;
}

ImageTensor crop(const ImageTensor& img, int top, int left, int height, int width) {
  SVAESR_REQUIRE(height >= 1 && width >= 1, "crop size must be positive");
  SVAESR_REQUIRE(top >= 0 && left >= 0 && top + height <= img.height() &&
                     left + width <= img.width(),
                 "crop window outside image");
  ImageTensor out(img.channels(), height, width, img.range());
  out.set_color_space(img.color_space());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
  return out;
}

ImageTensor rgb_to_y(const ImageTensor& img) {
  SVAESR_REQUIRE(img.channels() == 3 && img.color_space() == ColorSpace::kRGB,
                 "rgb_to_y expects an RGB image");
  ImageTensor out(1, img.height(), img.width(), img.range());
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto y = out.plane(0);
  // Luma weights sum to one, so the signed range maps onto itself as well.
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = static_cast<float>(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
  return out;
}

ImageTensor quantize_8bit(const ImageTensor& img) {
  ImageTensor out = to_unit(img);
  for (float& v : out.data()) v = static_cast<float>(std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return img.range() == ValueRange::kSigned ? to_signed(out) : out;
}

}  // namespace svaesr
