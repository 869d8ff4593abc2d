#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace svaesr {

enum class ValueRange { kUnit, kSigned };
enum class ColorSpace { kRGB, kY };

/// Width of the representable interval: 1 for [0,1], 2 for [-1,1].
double range_width(ValueRange range);

/// Planar C x H x W image of 32-bit floats.
///
/// The declared value range is a contract, not something enforced on every
/// write; call clamp_to_range() after arithmetic that may leave it.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, ValueRange range = ValueRange::kUnit,
              float fill = 0.0f);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  ValueRange range() const { return range_; }
  ColorSpace color_space() const { return color_; }
  void set_color_space(ColorSpace color) { color_ = color; }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> plane(int c) { return {data_.data() + c * pixels(), pixels()}; }
  std::span<const float> plane(int c) const { return {data_.data() + c * pixels(), pixels()}; }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const ImageTensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }
  bool in_range() const;
  void clamp_to_range();

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  ValueRange range_ = ValueRange::kUnit;
  ColorSpace color_ = ColorSpace::kRGB;
  std::vector<float> data_;
};

ImageTensor to_signed(const ImageTensor& img);
ImageTensor to_unit(const ImageTensor& img);

/// Replicates a single luma plane into three channels; RGB input is returned as is.
ImageTensor to_rgb(const ImageTensor& img);

ImageTensor crop(const ImageTensor& img, int top, int left, int height, int width);

/// BT.601 full-swing luma, no studio offset.
ImageTensor rgb_to_y(const ImageTensor& img);

/// Rounds every value to the nearest 8-bit level of its range, as a PNG round trip would.
ImageTensor quantize_8bit(const ImageTensor& img);

}  // namespace svaesr
