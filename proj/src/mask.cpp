#include "grapetrack/mask.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "grapetrack/error.hpp"

namespace grapetrack {

PixelRect intersect(const PixelRect& a, const PixelRect& b) {
    PixelRect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
    if (r.empty()) return {};
    return r;
}

InstanceMask::InstanceMask(int width, int height, std::vector<std::uint8_t> bits, double confidence)
    : width_(width), height_(height), bits_(std::move(bits)), confidence_(confidence) {
    if (width <= 0 || height <= 0) {
        throw ValidationError(fmt::format("mask dimensions must be positive, got {}x{}", width, height));
    }
    if (bits_.size() != std::size_t(width) * std::size_t(height)) {
        throw ValidationError(fmt::format("mask of {}x{} needs {} pixels, got {}", width, height,
                                          std::size_t(width) * height, bits_.size()));
    }
    tight_ = {width, height, 0, 0};
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = bits_.data() + std::size_t(y) * width;
        for (int x = 0; x < width; ++x) {
            if (row[x] == 0) continue;
            ++popcount_;
            tight_.x0 = std::min(tight_.x0, x);
            tight_.x1 = std::max(tight_.x1, x + 1);
            tight_.y0 = std::min(tight_.y0, y);
            tight_.y1 = std::max(tight_.y1, y + 1);
        }
    }
    if (popcount_ == 0) throw ValidationError("mask has no set pixels");
    for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

BoundingBox InstanceMask::box() const {
    return BoundingBox::from_pixels(tight_.to_box(), dims(), 0, confidence_);
}

InstanceMask InstanceMask::with_confidence(double confidence) const {
    InstanceMask copy = *this;
    copy.confidence_ = confidence;
    return copy;
}

MaskStack make_mask_stack(int width, int height, std::vector<InstanceMask> masks) {
    MaskStack stack{width, height, std::move(masks), 0};
    std::vector<std::uint8_t> hits(std::size_t(width) * height, 0);
    for (std::size_t i = 0; i < stack.masks.size(); ++i) {
        const auto& m = stack.masks[i];
        if (m.width() != width || m.height() != height) {
            throw ValidationError(fmt::format("mask {} is {}x{}, stack is {}x{}", i, m.width(),
                                              m.height(), width, height));
        }
        const auto bits = m.bits();
        for (std::size_t p = 0; p < bits.size(); ++p) {
            if (bits[p] && hits[p]++ == 1) ++stack.overlap_pixels;
        }
    }
    return stack;
}

std::vector<std::uint8_t> union_bits(std::span<const InstanceMask> masks, ImageDims dims) {
    std::vector<std::uint8_t> out(std::size_t(dims.width) * dims.height, 0);
    for (const auto& m : masks) {
        if (m.dims() != dims) {
            throw ValidationError(fmt::format("mask is {}x{}, expected {}x{}", m.width(), m.height(),
                                              dims.width, dims.height));
        }
        const PixelRect& r = m.tight_box();
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                const std::size_t p = std::size_t(y) * dims.width + x;
                out[p] |= m.bits()[p];
            }
        }
    }
    return out;
}

}  // namespace grapetrack
