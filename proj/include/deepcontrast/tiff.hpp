#pragma once

#include <string>

#include "deepcontrast/image.hpp"

namespace deepcontrast {

enum class TiffDType { Float32, Uint16, Uint8 };

/// Reads a multi-page grayscale TIFF (uint8/uint16/float32, uncompressed)
/// into a Volume. Page order becomes depth order; pixels are converted to
/// 32-bit float. Rejects RGB / multi-sample, compressed and tiled files.
Volume read_volume(const std::string& path);

/// Writes a Volume as a multi-page grayscale TIFF (little-endian, one strip
/// per page). float32 is lossless; uint16 clips to [0, 65535] and rounds.
void write_volume(const Volume& v, const std::string& path,
                  TiffDType dtype = TiffDType::Float32);

/// Writes binary masks (one plane per mask, 0/255) as a uint8 TIFF stack.
void write_mask_stack(const std::vector<std::vector<uint8_t>>& masks, int height,
                      int width, const std::string& path);

}  // namespace deepcontrast
