#include "advdef/errormap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace advdef {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

BlockGrid BlockGrid::fit(int height, int width, int target_rows, int target_cols) {
    if (height < 2 || width < 2 || target_rows < 2 || target_cols < 2)
        throw InvalidInput("BlockGrid::fit: dimensions too small");
    BlockGrid g;
    g.block_h = ceil_div(height, target_rows);
    g.block_w = ceil_div(width, target_cols);
    g.rows = ceil_div(height, g.block_h);
    g.cols = ceil_div(width, g.block_w);
    g.validate();
    return g;
}

void BlockGrid::validate() const {
    if (rows < 2 || cols < 2) throw InvalidInput("BlockGrid: rows and cols must be >= 2");
    if (block_h < 1 || block_w < 1) throw InvalidInput("BlockGrid: block size must be >= 1");
}

bool BlockGrid::covers(int height, int width) const {
    const bool rows_ok = rows * block_h >= height && (rows - 1) * block_h < height;
    const bool cols_ok = cols * block_w >= width && (cols - 1) * block_w < width;
    return rows_ok && cols_ok;
}

void BlockGrid::block_extent(int r, int c, int height, int width, int& r0, int& r1, int& c0,
                             int& c1) const {
    r0 = r * block_h;
    r1 = std::min((r + 1) * block_h, height);
    c0 = c * block_w;
    c1 = std::min((c + 1) * block_w, width);
}

void ErrorMap::validate() const {
    if (grid.rows() < 2 || grid.cols() < 2)
        throw InvalidInput("ErrorMap: grid must be at least 2x2");
    if (!grid.isFinite().all() || (grid < 0.0).any())
        throw InvalidInput("ErrorMap: entries must be finite and non-negative");
}

LowpassReconstructor::LowpassReconstructor(int factor) : factor_(factor) {
    if (factor < 2) throw InvalidInput("LowpassReconstructor: factor must be >= 2");
}

Image LowpassReconstructor::apply(const Image& img) const {
    const int dh = ceil_div(img.height, factor_);
    const int dw = ceil_div(img.width, factor_);
    Image small = resize_area(img, dh, dw);
    Image out = resize_bilinear(small, img.height, img.width);
    clamp_pixels(out);
    return out;
}

MedianReconstructor::MedianReconstructor(int kernel) : kernel_(kernel) {
    if (kernel < 3 || kernel % 2 == 0)
        throw InvalidInput("MedianReconstructor: kernel must be odd and >= 3");
}

Image MedianReconstructor::apply(const Image& img) const {
    const int half = kernel_ / 2;
    Image out = img;
    std::vector<float> window(static_cast<std::size_t>(kernel_) * kernel_);
    for (std::size_t ch = 0; ch < img.planes.size(); ++ch) {
        const Plane& src = img.planes[ch];
        Plane& dst = out.planes[ch];
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                std::size_t n = 0;
                for (int dy = -half; dy <= half; ++dy) {
                    const int yy = std::clamp(y + dy, 0, img.height - 1);
                    for (int dx = -half; dx <= half; ++dx) {
                        const int xx = std::clamp(x + dx, 0, img.width - 1);
                        window[n++] = src(yy, xx);
                    }
                }
                auto mid = window.begin() + static_cast<std::ptrdiff_t>(n / 2);
                std::nth_element(window.begin(), mid, window.begin() + static_cast<std::ptrdiff_t>(n));
                dst(y, x) = *mid;
            }
        }
    }
    clamp_pixels(out);
    return out;
}

std::unique_ptr<Reconstructor> make_reconstructor(const std::string& name, int median_kernel) {
    if (name == "lowpass") return std::make_unique<LowpassReconstructor>();
    if (name == "median") return std::make_unique<MedianReconstructor>(median_kernel);
    throw InvalidInput("unknown reconstructor: " + name);
}

Image reconstruct(const Image& img, const Reconstructor& method) {
    img.validate();
    Image out = method.apply(img);
    if (!out.same_shape(img)) throw InvalidInput("reconstruct: output shape mismatch");
    return out;
}

ErrorMap block_losses(const Image& image, const Image& recon, const BlockGrid& grid) {
    if (!image.same_shape(recon)) throw InvalidInput("block_losses: shape mismatch");
    grid.validate();
    if (!grid.covers(image.height, image.width))
        throw InvalidInput("block_losses: grid does not cover the image");

    ErrorMap map;
    map.grid = Eigen::ArrayXXd::Zero(grid.rows, grid.cols);
    map.source = MapSource::Computed;
    const int channels = image.channels();
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            int r0, r1, c0, c1;
            grid.block_extent(r, c, image.height, image.width, r0, r1, c0, c1);
            double acc = 0.0;
            for (int ch = 0; ch < channels; ++ch) {
                const Plane& a = image.planes[static_cast<std::size_t>(ch)];
                const Plane& b = recon.planes[static_cast<std::size_t>(ch)];
                for (int y = r0; y < r1; ++y)
                    for (int x = c0; x < c1; ++x) {
                        const double d = static_cast<double>(a(y, x)) - static_cast<double>(b(y, x));
                        acc += d * d;
                    }
            }
            const double count = static_cast<double>(r1 - r0) * (c1 - c0) * channels;
            map.grid(r, c) = acc / count;
        }
    }
    return map;
}

std::vector<double> flatten_losses(const ErrorMap& map) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(map.grid.size()));
    for (Eigen::Index r = 0; r < map.grid.rows(); ++r)
        for (Eigen::Index c = 0; c < map.grid.cols(); ++c) out.push_back(map.grid(r, c));
    return out;
}

namespace {

ErrorMap parse_error_map(std::istream& in, const std::string& origin) {
    int rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 2 || cols < 2)
        throw ParseError("loss map: bad header in " + origin);
    ErrorMap map;
    map.grid.resize(rows, cols);
    map.source = MapSource::Imported;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double v = 0.0;
            if (!(in >> v)) throw ParseError("loss map: truncated data in " + origin);
            if (!std::isfinite(v) || v < 0.0)
                throw ParseError("loss map: entries must be finite and non-negative in " + origin);
            map.grid(r, c) = v;
        }
    }
    double extra;
    if (in >> extra) throw ParseError("loss map: trailing data in " + origin);
    return map;
}

}  // namespace

ErrorMap import_error_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open loss map: " + path.string());
    return parse_error_map(in, path.string());
}

ErrorMap import_error_map(const std::filesystem::path& path, int expected_rows,
                          int expected_cols) {
    ErrorMap map = import_error_map(path);
    if (map.grid.rows() != expected_rows || map.grid.cols() != expected_cols)
        throw ParseError("loss map: expected " + std::to_string(expected_rows) + "x" +
                         std::to_string(expected_cols) + " grid in " + path.string());
    return map;
}

void export_error_map(const std::filesystem::path& path, const ErrorMap& map) {
    map.validate();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write loss map: " + path.string());
    out << map.grid.rows() << " " << map.grid.cols() << "\n";
    char buf[64];
    for (Eigen::Index r = 0; r < map.grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < map.grid.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", map.grid(r, c));
            out << buf << (c + 1 < map.grid.cols() ? " " : "\n");
        }
    }
    if (!out) throw ParseError("cannot write loss map: " + path.string());
}

}  // namespace advdef
