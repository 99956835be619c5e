#pragma once

#include "deepcontrast/image.hpp"

namespace deepcontrast {

/// Contrast-limited adaptive histogram equalization. `tile` is the number of
/// tiles per image dimension; per-tile histograms are clipped at
/// clip_limit * (tile pixels / bins) with the excess redistributed uniformly,
/// and each pixel is mapped by bilinear interpolation between the four
/// neighboring tile mappings. Output spans the input's [min, max] range.
Plane clahe(const Plane& p, int tile = 8, float clip_limit = 3.0f, int bins = 256);

/// Plain global histogram equalization over the input range; the CLAHE
/// limit-free single-tile case converges to this.
Plane global_histogram_equalize(const Plane& p, int bins = 256);

}  // namespace deepcontrast
