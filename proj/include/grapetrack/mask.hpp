#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "grapetrack/boxes.hpp"

namespace grapetrack {

/// Integer pixel rectangle, half-open: [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    PixelBox to_box() const { return {double(x0), double(y0), double(width()), double(height())}; }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

PixelRect intersect(const PixelRect& a, const PixelRect& b);

/// Binary mask of one grape cluster over the full frame raster.
///
/// Invariants (checked on construction): width * height == bits.size(), at
/// least one set bit. The tight box is derived, never supplied.
class InstanceMask {
public:
    /// Any nonzero byte counts as a set bit. Throws ValidationError when the
    /// mask is empty or the raster size does not match.
    InstanceMask(int width, int height, std::vector<std::uint8_t> bits, double confidence = 1.0);

    int width() const { return width_; }
    int height() const { return height_; }
    ImageDims dims() const { return {width_, height_}; }
    std::span<const std::uint8_t> bits() const { return bits_; }
    bool test(int x, int y) const { return bits_[std::size_t(y) * width_ + x] != 0; }
    std::size_t popcount() const { return popcount_; }
    const PixelRect& tight_box() const { return tight_; }
    /// Tight box normalized by the raster dims.
    BoundingBox box() const;
    double confidence() const { return confidence_; }
    InstanceMask with_confidence(double confidence) const;

    friend bool operator==(const InstanceMask& a, const InstanceMask& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.bits_ == b.bits_;
    }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
    std::size_t popcount_ = 0;
    PixelRect tight_;
    double confidence_;
};

/// Ordered masks from one image; mask i pairs with line i of the box file.
struct MaskStack {
    int width = 0;
    int height = 0;
    std::vector<InstanceMask> masks;
    /// Pixels set in more than one slice. Recorded, not rejected.
    std::size_t overlap_pixels = 0;

    std::size_t n_clusters() const { return masks.size(); }
};

/// Builds a stack from masks sharing one raster and fills in the overlap count.
MaskStack make_mask_stack(int width, int height, std::vector<InstanceMask> masks);

/// Union of a set of masks as a plain 0/1 raster.
std::vector<std::uint8_t> union_bits(std::span<const InstanceMask> masks, ImageDims dims);

}  // namespace grapetrack
