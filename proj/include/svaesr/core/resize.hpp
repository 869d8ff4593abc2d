#pragma once

#include "svaesr/core/image.hpp"

namespace svaesr {

/// Bicubic (a = -0.5) resample with half-pixel-center alignment to
/// round(H * scale) x round(W * scale). Shrinking applies the antialiasing
/// kernel stretch used by the standard benchmark LR synthesis unless disabled.
/// The result is clamped to the input's value range.
ImageTensor bicubic_resize(const ImageTensor& img, double scale, bool antialias = true);

/// Same filter with explicit output dimensions; each axis uses its own scale out/in.
ImageTensor bicubic_resize_to(const ImageTensor& img, int out_h, int out_w, bool antialias = true);

namespace serial {

ImageTensor bicubic_resize_to(const ImageTensor& img, int out_h, int out_w, bool antialias = true);

}  // namespace serial

}  // namespace svaesr
