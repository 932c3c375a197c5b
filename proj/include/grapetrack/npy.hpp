#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace grapetrack {

/// A decoded NumPy array restricted to one-byte element types.
struct NpyArray {
    std::string descr;  // '|b1' or '|u1'
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> data;  // C order
};

/// Reads a .npy payload (format versions 1-3). Only C-order bool/uint8
/// arrays are accepted; anything else is a FormatError.
NpyArray read_npy(std::span<const std::uint8_t> bytes);

/// Serializes as format version 1.0 with a 64-byte aligned header.
std::vector<std::uint8_t> write_npy(const NpyArray& array);

/// Members of a .npz archive keyed by name without the ".npy" suffix, in
/// archive order of appearance sorted by name. Stored and deflated members
/// are supported.
std::map<std::string, NpyArray> read_npz(std::span<const std::uint8_t> bytes);

/// Writes an uncompressed (stored) zip archive of .npy members.
std::vector<std::uint8_t> write_npz(const std::map<std::string, NpyArray>& members);

}  // namespace grapetrack
