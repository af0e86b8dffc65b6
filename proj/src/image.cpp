#include "advdef/image.hpp"

#include <algorithm>
#include <cmath>

namespace advdef {

Image::Image(int h, int w, int channels, float fill) : height(h), width(w) {
    if (h < 1 || w < 1 || (channels != 1 && channels != 3))
        throw InvalidInput("Image: bad dimensions or channel count");
    planes.assign(static_cast<std::size_t>(channels), Plane::Constant(h, w, fill));
}

void Image::validate() const {
    if (height < 8 || width < 8)
        throw InvalidInput("Image: height and width must be >= 8");
    if (channels() != 1 && channels() != 3)
        throw InvalidInput("Image: channel count must be 1 or 3");
    for (const Plane& p : planes) {
        if (p.rows() != height || p.cols() != width)
            throw InvalidInput("Image: plane shape mismatch");
        if (!p.isFinite().all() || (p < 0.0f).any() || (p > 1.0f).any())
            throw InvalidInput("Image: pixel values must be finite in [0, 1]");
    }
}

Plane Image::to_gray() const {
    if (planes.empty()) throw InvalidInput("Image: empty");
    if (planes.size() == 1) return planes[0];
    Plane g = planes[0];
    for (std::size_t c = 1; c < planes.size(); ++c) g += planes[c];
    return g / static_cast<float>(planes.size());
}

void clamp_pixels(Image& img) {
    for (Plane& p : img.planes) p = p.cwiseMax(0.0f).cwiseMin(1.0f);
}

Plane resize_area(const Plane& src, int out_h, int out_w) {
    const int ih = static_cast<int>(src.rows());
    const int iw = static_cast<int>(src.cols());
    if (out_h < 1 || out_w < 1 || ih < 1 || iw < 1)
        throw InvalidInput("resize_area: bad dimensions");
    Plane dst(out_h, out_w);
    const double sy = static_cast<double>(ih) / out_h;
    const double sx = static_cast<double>(iw) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        const int iy0 = static_cast<int>(std::floor(y0));
        const int iy1 = std::min(ih, static_cast<int>(std::ceil(y1)));
        for (int ox = 0; ox < out_w; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            const int ix0 = static_cast<int>(std::floor(x0));
            const int ix1 = std::min(iw, static_cast<int>(std::ceil(x1)));
            double acc = 0.0, area = 0.0;
            for (int y = iy0; y < iy1; ++y) {
                const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                for (int x = ix0; x < ix1; ++x) {
                    const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    acc += wy * wx * src(y, x);
                    area += wy * wx;
                }
            }
            dst(oy, ox) = static_cast<float>(acc / area);
        }
    }
    return dst;
}

Plane resize_bilinear(const Plane& src, int out_h, int out_w) {
    const int ih = static_cast<int>(src.rows());
    const int iw = static_cast<int>(src.cols());
    if (out_h < 1 || out_w < 1 || ih < 1 || iw < 1)
        throw InvalidInput("resize_bilinear: bad dimensions");
    Plane dst(out_h, out_w);
    const double sy = static_cast<double>(ih) / out_h;
    const double sx = static_cast<double>(iw) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(ih - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, ih - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(iw - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, iw - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * src(y0, x0) + wx * src(y0, x1);
            const double bot = (1.0 - wx) * src(y1, x0) + wx * src(y1, x1);
            dst(oy, ox) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return dst;
}

namespace {

Image map_planes(const Image& img, Plane (*fn)(const Plane&, int, int), int oh, int ow) {
    Image out;
    out.height = oh;
    out.width = ow;
    out.planes.reserve(img.planes.size());
    for (const Plane& p : img.planes) out.planes.push_back(fn(p, oh, ow));
    return out;
}

}  // namespace

Image resize_area(const Image& img, int out_h, int out_w) {
    return map_planes(img, &resize_area, out_h, out_w);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    return map_planes(img, &resize_bilinear, out_h, out_w);
}

Image crop(const Image& img, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > img.height || left + w > img.width)
        throw InvalidInput("crop: rectangle out of bounds");
    Image out;
    out.height = h;
    out.width = w;
    out.planes.reserve(img.planes.size());
    for (const Plane& p : img.planes) out.planes.emplace_back(p.block(top, left, h, w));
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out = img;
    for (Plane& p : out.planes) p = p.rowwise().reverse().eval();
    return out;
}

float max_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw InvalidInput("max_abs_diff: shape mismatch");
    float m = 0.0f;
    for (std::size_t c = 0; c < a.planes.size(); ++c)
        m = std::max(m, (a.planes[c] - b.planes[c]).abs().maxCoeff());
    return m;
}

}  // namespace advdef
