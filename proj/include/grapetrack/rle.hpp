#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grapetrack/mask.hpp"

namespace grapetrack {

/// Run lengths of alternating 0/1 runs in row-major order. The first run is
/// always a 0-run and may have length 0.
std::vector<std::uint64_t> rle_runs(std::span<const std::uint8_t> bits);

/// Inverse of rle_runs. Throws ParseError when the runs do not sum to `size`.
std::vector<std::uint8_t> rle_expand(std::span<const std::uint64_t> runs, std::size_t size);

/// Two-line record: "RLE v1 <width> <height>\n<run>,<run>,...\n".
std::string encode_rle(const InstanceMask& mask);

/// Decodes exactly one record. Surrounding blank lines are ignored.
InstanceMask decode_rle(std::string_view record, double confidence = 1.0);

/// A stack is its records concatenated in order. An empty text is an empty
/// stack of unknown size (width = height = 0).
std::string encode_rle_stack(const MaskStack& stack);
MaskStack decode_rle_stack(std::string_view text);

}  // namespace grapetrack
