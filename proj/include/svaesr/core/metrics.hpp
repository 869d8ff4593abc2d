#pragma once

#include "svaesr/core/image.hpp"

namespace svaesr {

/// Reported in place of +inf when two images are identical.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE) over all channels after trimming `border_crop`
/// pixels from every edge. peak is the width of the shared value range.
/// Results are capped at kPsnrCap.
double psnr(const ImageTensor& a, const ImageTensor& b, int border_crop = 0);

}  // namespace svaesr
