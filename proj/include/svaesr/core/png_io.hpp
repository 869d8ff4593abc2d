#pragma once

#include <string>

#include "svaesr/core/image.hpp"

namespace svaesr {

/// Reads an 8-bit PNG into a unit-range tensor: gray images give one channel,
/// everything else three (alpha is dropped). 16-bit files are rejected.
ImageTensor load_image(const std::string& path);

/// Writes an 8-bit PNG. Values are clamped to [0, 1] and rounded half away
/// from zero; signed-range tensors are mapped to unit range first.
void save_image(const ImageTensor& img, const std::string& path);

/// Cheap open-time check: the file exists and starts with the PNG signature.
bool has_png_signature(const std::string& path);

}  // namespace svaesr
