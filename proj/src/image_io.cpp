#include "advdef/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace advdef {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw ParseError("cannot open file: " + path.string());
    return f;
}

std::uint8_t to_byte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    (void)png;
    throw ParseError(std::string("png: ") + msg);
}

void png_warn_fn(png_structp, png_const_charp) {}

Image read_png_file(std::FILE* f, const std::filesystem::path& path) {
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw ParseError("png: cannot allocate read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ParseError("png: cannot allocate info struct");
    }
    try {
        png_init_io(png, f);
        png_read_info(png, info);

        const png_uint_32 w = png_get_image_width(png, info);
        const png_uint_32 h = png_get_image_height(png, info);
        const int depth = png_get_bit_depth(png, info);
        const int color = png_get_color_type(png, info);

        if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)
            throw ParseError("png: only 8-bit gray or RGB supported: " + path.string());
        if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (depth > 8) throw ParseError("png: 16-bit depth not supported: " + path.string());
        png_read_update_info(png, info);

        const int channels = (color == PNG_COLOR_TYPE_RGB) ? 3 : 1;
        std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
        std::vector<png_bytep> rows(h);
        for (png_uint_32 y = 0; y < h; ++y)
            rows[y] = data.data() + static_cast<std::size_t>(y) * w * channels;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
        png_destroy_read_struct(&png, &info, nullptr);

        Image img(static_cast<int>(h), static_cast<int>(w), channels);
        for (int y = 0; y < static_cast<int>(h); ++y)
            for (int x = 0; x < static_cast<int>(w); ++x)
                for (int c = 0; c < channels; ++c)
                    img.planes[c](y, x) =
                        data[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0f;
        return img;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

int read_ppm_token(std::FILE* f) {
    // Skips whitespace and '#' comments, returns a non-negative integer.
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (!std::isspace(c)) {
            break;
        }
        c = std::fgetc(f);
    }
    if (c == EOF || !std::isdigit(c)) throw ParseError("ppm: malformed header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        if (value > 1 << 30) throw ParseError("ppm: header value too large");
        c = std::fgetc(f);
    }
    if (c != EOF && !std::isspace(c)) throw ParseError("ppm: malformed header");
    return value;
}

Image read_ppm_file(std::FILE* f, const std::filesystem::path& path, int channels) {
    const int w = read_ppm_token(f);
    const int h = read_ppm_token(f);
    const int maxval = read_ppm_token(f);
    if (maxval != 255) throw ParseError("ppm: only maxval 255 supported: " + path.string());
    if (w < 1 || h < 1) throw ParseError("ppm: bad dimensions: " + path.string());
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
    if (std::fread(data.data(), 1, data.size(), f) != data.size())
        throw ParseError("ppm: truncated pixel data: " + path.string());
    Image img(h, w, channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.planes[c](y, x) =
                    data[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0f;
    return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    std::uint8_t sig[8] = {};
    const std::size_t got = std::fread(sig, 1, sizeof(sig), f.get());
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
        std::rewind(f.get());
        return read_png_file(f.get(), path);
    }
    if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) {
        std::fseek(f.get(), 2, SEEK_SET);
        return read_ppm_file(f.get(), path, sig[1] == '6' ? 3 : 1);
    }
    throw ParseError("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& img) {
    img.validate();
    FilePtr f = open_file(path, "wb");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw ParseError("png: cannot allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ParseError("png: cannot allocate info struct");
    }
    try {
        png_init_io(png, f.get());
        const int channels = img.channels();
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                     static_cast<png_uint_32>(img.height), 8,
                     channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * channels);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < channels; ++c)
                    row[static_cast<std::size_t>(x) * channels + c] = to_byte(img.planes[c](y, x));
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

void write_mask_png(const std::filesystem::path& path,
                    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& bits) {
    FilePtr f = open_file(path, "wb");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw ParseError("png: cannot allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ParseError("png: cannot allocate info struct");
    }
    try {
        png_init_io(png, f.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(bits.cols()),
                     static_cast<png_uint_32>(bits.rows()), 1, PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        png_set_packing(png);  // accept one byte per pixel, pack to 1 bit

        std::vector<std::uint8_t> row(static_cast<std::size_t>(bits.cols()));
        for (Eigen::Index y = 0; y < bits.rows(); ++y) {
            for (Eigen::Index x = 0; x < bits.cols(); ++x)
                row[static_cast<std::size_t>(x)] = bits(y, x) ? 1 : 0;
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
    img.validate();
    FilePtr f = open_file(path, "wb");
    const int channels = img.channels();
    std::string header = (channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size())
        throw ParseError("ppm: write failed: " + path.string());
    std::vector<std::uint8_t> data(static_cast<std::size_t>(img.width) * img.height * channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < channels; ++c)
                data[(static_cast<std::size_t>(y) * img.width + x) * channels + c] =
                    to_byte(img.planes[c](y, x));
    if (std::fwrite(data.data(), 1, data.size(), f.get()) != data.size())
        throw ParseError("ppm: write failed: " + path.string());
}

}  // namespace advdef
