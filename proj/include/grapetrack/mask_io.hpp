#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "grapetrack/mask.hpp"
#include "grapetrack/npy.hpp"

namespace grapetrack {

enum class MaskFormat { npy, npz, rle };

/// Format from a file extension (".npy", ".npz", ".rle"); nullopt otherwise.
std::optional<MaskFormat> mask_format_for(std::string_view path);

/// Decodes an H x W x n stack (a 2-D array is one slice). Nonzero values are
/// set bits. An all-zero slice is a ValidationError naming every empty index;
/// `expected` dims, when given, must match.
MaskStack load_mask_stack(std::span<const std::uint8_t> bytes, MaskFormat format,
                          std::optional<ImageDims> expected = std::nullopt);

/// H x W x n uint8 array in C order.
NpyArray to_npy_array(const MaskStack& stack);

/// Bytes in the requested format (npz holds a single member "arr_0").
std::vector<std::uint8_t> encode_mask_stack(const MaskStack& stack, MaskFormat format);

}  // namespace grapetrack
