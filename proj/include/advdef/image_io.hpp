#pragma once

#include <filesystem>

#include "advdef/image.hpp"

namespace advdef {

// Reads an 8-bit PNG (gray or RGB) or binary PPM/PGM (P6/P5, maxval 255).
// Pixels are decoded to [0, 1] by dividing by 255. Format is picked by
// sniffing the file signature, not the extension.
Image read_image(const std::filesystem::path& path);

// Writes 8-bit PNG; gray images become single-channel PNGs.
void write_png(const std::filesystem::path& path, const Image& img);

// Writes a binary mask as a 1-bit grayscale PNG (0 -> black, 1 -> white).
void write_mask_png(const std::filesystem::path& path,
                    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& bits);

// Writes binary PPM (P6) for RGB or PGM (P5) for gray, maxval 255.
void write_ppm(const std::filesystem::path& path, const Image& img);

}  // namespace advdef
