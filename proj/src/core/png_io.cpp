#include "svaesr/core/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "svaesr/core/error.hpp"

namespace svaesr {

namespace {

struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

ImageTensor load_image(const std::string& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str()))
    throw IoError("cannot read PNG '" + path + "': " + png.image.message);
  if (png.image.format & PNG_FORMAT_FLAG_LINEAR)
    throw IoError("unsupported bit depth in '" + path + "': only 8-bit PNG is supported");
  const bool gray = !(png.image.format & PNG_FORMAT_FLAG_COLOR);
  png.image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGBA;
  const int channels_in = gray ? 1 : 4;
  const int h = static_cast<int>(png.image.height);
  const int w = static_cast<int>(png.image.width);
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr))
    throw IoError("cannot decode PNG '" + path + "': " + png.image.message);

  ImageTensor img(gray ? 1 : 3, h, w, ValueRange::kUnit);
  for (int c = 0; c < img.channels(); ++c) {
    auto plane = img.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i)
      plane[i] = buffer[i * channels_in + c] / 255.0f;
  }
  return img;
}

void save_image(const ImageTensor& img, const std::string& path) {
  SVAESR_REQUIRE(!img.empty(), "cannot save an empty image");
  const ImageTensor unit = to_unit(img);
  const int channels = unit.channels();
  std::vector<std::uint8_t> buffer(unit.size());
  for (int c = 0; c < channels; ++c) {
    auto plane = unit.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const float v = std::clamp(plane[i], 0.0f, 1.0f) * 255.0f;
      buffer[i * channels + c] = static_cast<std::uint8_t>(std::round(v));
    }
  }
  PngImage png;
  png.image.width = static_cast<png_uint_32>(unit.width());
  png.image.height = static_cast<png_uint_32>(unit.height());
  png.image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path + "': " + png.image.message);
}

bool has_png_signature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  png_byte sig[8] = {};
  if (!in.read(reinterpret_cast<char*>(sig), sizeof(sig))) return false;
  return png_sig_cmp(sig, 0, sizeof(sig)) == 0;
}

}  // namespace svaesr
