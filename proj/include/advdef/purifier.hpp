#pragma once

#include "advdef/sentinel.hpp"

namespace advdef {

// Binary pixel mask aligned with a target image.
struct PixelMask {
    int height = 0;
    int width = 0;
    Mask bits;

    void validate() const;
    long count() const { return bits.count(); }
};

// Rasterizes a block component into pixel space: the union of its blocks,
// dilated by `dilation` blocks in 8-connectivity and clipped to the image.
PixelMask build_mask(const std::vector<BlockCoord>& component, const BlockGrid& grid,
                     int dilation, int height, int width);

// Pixels inside the mask are set to `gray` on every channel; pixels outside
// are copied bit-identically. Idempotent.
Image apply_gray_mask(const Image& image, const PixelMask& mask, float gray);

// Intersection-over-union of two masks of identical shape.
double mask_iou(const PixelMask& a, const PixelMask& b);

}  // namespace advdef
