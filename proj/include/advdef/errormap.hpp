#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "advdef/image.hpp"

namespace advdef {

// Partition of an image into rows x cols blocks. The last row/column may be
// partial; every block contains at least one pixel.
struct BlockGrid {
    int rows = 0;
    int cols = 0;
    int block_h = 0;
    int block_w = 0;

    // Chooses block sizes so at most target_rows x target_cols blocks cover
    // the image: block_h = ceil(h / target_rows), rows = ceil(h / block_h).
    // A 224x224 image with the 14x14 default yields 16-px blocks exactly.
    static BlockGrid fit(int height, int width, int target_rows = 14, int target_cols = 14);

    void validate() const;

    // True when the grid tiles an height x width image with no empty and no
    // missing blocks.
    bool covers(int height, int width) const;

    int block_count() const { return rows * cols; }

    // Pixel extents of block (r, c), clipped to the image.
    void block_extent(int r, int c, int height, int width, int& r0, int& r1, int& c0,
                      int& c1) const;
};

enum class MapSource { Computed, Imported };

// Grid of non-negative block-wise reconstruction losses.
struct ErrorMap {
    Eigen::ArrayXXd grid;  // rows x cols
    MapSource source = MapSource::Computed;

    void validate() const;
    double total() const { return grid.sum(); }
};

// Image -> image map of identical shape, deterministic for a fixed
// configuration; output pixels stay in [0, 1].
class Reconstructor {
public:
    virtual ~Reconstructor() = default;
    virtual Image apply(const Image& img) const = 0;
    virtual std::string_view name() const = 0;
};

// Area downsample by an integer factor followed by bilinear upsample.
// High-frequency content (noise, saturated patches) does not survive the
// round trip and shows up as residual.
class LowpassReconstructor final : public Reconstructor {
public:
    explicit LowpassReconstructor(int factor = 4);
    Image apply(const Image& img) const override;
    std::string_view name() const override { return "lowpass"; }

private:
    int factor_;
};

// k x k median filter with edge-clamped windows. Preserves step edges,
// removes impulsive content.
class MedianReconstructor final : public Reconstructor {
public:
    explicit MedianReconstructor(int kernel = 5);
    Image apply(const Image& img) const override;
    std::string_view name() const override { return "median"; }

private:
    int kernel_;
};

// Factory for the reference reconstructors: "lowpass" or "median".
std::unique_ptr<Reconstructor> make_reconstructor(const std::string& name,
                                                  int median_kernel = 5);

// Validates the input and applies the reconstructor.
Image reconstruct(const Image& img, const Reconstructor& method);

// Entry (r, c) is the mean squared pixel difference over block (r, c),
// averaged over the block's actual pixels and all channels.
ErrorMap block_losses(const Image& image, const Image& recon, const BlockGrid& grid);

// Flattened copy of the grid in row-major block order.
std::vector<double> flatten_losses(const ErrorMap& map);

// Loss-map text format: line 1 "rows cols", then `rows` lines of `cols`
// space-separated decimal floats. Round-trips bit-exactly.
ErrorMap import_error_map(const std::filesystem::path& path, int expected_rows,
                          int expected_cols);
ErrorMap import_error_map(const std::filesystem::path& path);
void export_error_map(const std::filesystem::path& path, const ErrorMap& map);

}  // namespace advdef
