#pragma once

#include <Eigen/Core>

#include <vector>

#include "advdef/types.hpp"

namespace advdef {

using Plane = Eigen::ArrayXXf;  // height x width, values in [0, 1]

// Dense raster image, 1 (gray) or 3 (RGB) channel planes.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<Plane> planes;

    Image() = default;
    Image(int h, int w, int channels, float fill = 0.0f);

    int channels() const { return static_cast<int>(planes.size()); }

    // Throws InvalidInput unless height, width >= 8, channels in {1, 3},
    // plane shapes consistent and every pixel finite in [0, 1].
    void validate() const;

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width &&
               channels() == other.channels();
    }

    // Channel mean; the single plane itself for grayscale input.
    Plane to_gray() const;
};

// Clamp every pixel of every plane into [0, 1] in place.
void clamp_pixels(Image& img);

// Box-filter resize: each output pixel is the exact area average of the
// source region it covers. Works for any size change.
Plane resize_area(const Plane& src, int out_h, int out_w);

// Bilinear resize with half-pixel centers, edge-clamped.
Plane resize_bilinear(const Plane& src, int out_h, int out_w);

Image resize_area(const Image& img, int out_h, int out_w);
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Crop the rectangle [top, top+h) x [left, left+w); bounds-checked.
Image crop(const Image& img, int top, int left, int h, int w);

Image flip_horizontal(const Image& img);

// Largest absolute pixel difference over all channels.
float max_abs_diff(const Image& a, const Image& b);

}  // namespace advdef
