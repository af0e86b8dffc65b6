#include "advdef/purifier.hpp"

#include <algorithm>

namespace advdef {

void PixelMask::validate() const {
    if (height < 1 || width < 1 || bits.rows() != height || bits.cols() != width)
        throw InvalidInput("PixelMask: shape mismatch");
}

PixelMask build_mask(const std::vector<BlockCoord>& component, const BlockGrid& grid,
                     int dilation, int height, int width) {
    if (component.empty()) throw InvalidInput("build_mask: empty component");
    if (dilation < 0) throw InvalidInput("build_mask: negative dilation");
    grid.validate();
    if (!grid.covers(height, width)) throw InvalidInput("build_mask: grid does not cover image");

    Mask block_bits = Mask::Constant(grid.rows, grid.cols, false);
    for (const BlockCoord& b : component) {
        if (b.row < 0 || b.row >= grid.rows || b.col < 0 || b.col >= grid.cols)
            throw InvalidInput("build_mask: component block outside grid");
        // Chebyshev ball of radius `dilation` = repeated 8-connected dilation
        for (int dr = -dilation; dr <= dilation; ++dr) {
            for (int dc = -dilation; dc <= dilation; ++dc) {
                const int r = b.row + dr, c = b.col + dc;
                if (r >= 0 && r < grid.rows && c >= 0 && c < grid.cols) block_bits(r, c) = true;
            }
        }
    }

    PixelMask mask;
    mask.height = height;
    mask.width = width;
    mask.bits = Mask::Constant(height, width, false);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (!block_bits(r, c)) continue;
            int r0, r1, c0, c1;
            grid.block_extent(r, c, height, width, r0, r1, c0, c1);
            mask.bits.block(r0, c0, r1 - r0, c1 - c0).setConstant(true);
        }
    }
    return mask;
}

Image apply_gray_mask(const Image& image, const PixelMask& mask, float gray) {
    image.validate();
    mask.validate();
    if (mask.height != image.height || mask.width != image.width)
        throw InvalidInput("apply_gray_mask: mask does not match image shape");
    if (!(gray >= 0.0f && gray <= 1.0f)) throw InvalidInput("apply_gray_mask: gray out of [0,1]");

    Image out = image;
    for (Plane& p : out.planes) p = mask.bits.select(Plane::Constant(image.height, image.width, gray), p);
    return out;
}

double mask_iou(const PixelMask& a, const PixelMask& b) {
    a.validate();
    b.validate();
    if (a.height != b.height || a.width != b.width)
        throw InvalidInput("mask_iou: shape mismatch");
    const long inter = (a.bits && b.bits).count();
    const long uni = (a.bits || b.bits).count();
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace advdef
