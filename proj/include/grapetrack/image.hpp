#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace grapetrack {

/// Interleaved 8-bit RGB raster.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    const std::uint8_t* pixel(int x, int y) const { return rgb.data() + 3 * (std::size_t(y) * width + x); }
};

/// Single-channel real raster.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
};

/// Binary PPM (P6, maxval 255). Throws FormatError on anything else.
RgbImage read_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const RgbImage& image);

/// 0.299 R + 0.587 G + 0.114 B.
GrayImage luminance(const RgbImage& image);

/// Dilation minus erosion over a 3x3 window (clipped at the border).
GrayImage morphological_gradient(const GrayImage& image);

}  // namespace grapetrack
