#include "grapetrack/mask_io.hpp"

#include <string>

#include <fmt/format.h>

#include "grapetrack/error.hpp"
#include "grapetrack/rle.hpp"

namespace grapetrack {

std::optional<MaskFormat> mask_format_for(std::string_view path) {
    if (path.ends_with(".npy")) return MaskFormat::npy;
    if (path.ends_with(".npz")) return MaskFormat::npz;
    if (path.ends_with(".rle")) return MaskFormat::rle;
    return std::nullopt;
}

namespace {

MaskStack stack_from_array(const NpyArray& array) {
    if (array.shape.size() != 2 && array.shape.size() != 3) {
        throw ValidationError(fmt::format("mask array must be H x W x n, got {} dimensions",
                                          array.shape.size()));
    }
    const std::size_t h = array.shape[0];
    const std::size_t w = array.shape[1];
    const std::size_t n = array.shape.size() == 3 ? array.shape[2] : 1;
    if (h == 0 || w == 0) throw ValidationError("mask array has a zero spatial dimension");

    std::vector<std::vector<std::uint8_t>> slices(n, std::vector<std::uint8_t>(h * w, 0));
    std::vector<std::size_t> counts(n, 0);
    const std::uint8_t* src = array.data.data();
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t i = 0; i < n; ++i) {
            if (src[p * n + i] != 0) {
                slices[i][p] = 1;
                ++counts[i];
            }
        }
    }
    std::vector<std::size_t> empty;
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] == 0) empty.push_back(i);
    }
    if (!empty.empty()) {
        throw ValidationError(fmt::format("empty mask slice(s) at index {}", fmt::join(empty, ", ")));
    }
    std::vector<InstanceMask> masks;
    masks.reserve(n);
    for (auto& s : slices) masks.emplace_back(int(w), int(h), std::move(s));
    return make_mask_stack(int(w), int(h), std::move(masks));
}

}  // namespace

MaskStack load_mask_stack(std::span<const std::uint8_t> bytes, MaskFormat format,
                          std::optional<ImageDims> expected) {
    MaskStack stack;
    switch (format) {
        case MaskFormat::npy:
            stack = stack_from_array(read_npy(bytes));
            break;
        case MaskFormat::npz: {
            const auto members = read_npz(bytes);
            if (members.empty()) throw FormatError("NPZ archive has no arrays");
            if (members.size() > 1 && !members.contains("arr_0")) {
                throw FormatError("NPZ archive holds several arrays and none is 'arr_0'");
            }
            const auto& array = members.contains("arr_0") ? members.at("arr_0") : members.begin()->second;
            stack = stack_from_array(array);
            break;
        }
        case MaskFormat::rle:
            stack = decode_rle_stack(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
            break;
    }
    if (expected && stack.n_clusters() > 0 && (stack.width != expected->width || stack.height != expected->height)) {
        throw ValidationError(fmt::format("mask stack is {}x{}, image is {}x{}", stack.width, stack.height,
                                          expected->width, expected->height));
    }
    if (expected && stack.n_clusters() == 0) {
        stack.width = expected->width;
        stack.height = expected->height;
    }
    return stack;
}

NpyArray to_npy_array(const MaskStack& stack) {
    const std::size_t h = std::size_t(stack.height);
    const std::size_t w = std::size_t(stack.width);
    const std::size_t n = stack.n_clusters();
    NpyArray out{"|u1", {h, w, n}, std::vector<std::uint8_t>(h * w * n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = stack.masks[i].bits();
        for (std::size_t p = 0; p < h * w; ++p) out.data[p * n + i] = bits[p];
    }
    return out;
}

std::vector<std::uint8_t> encode_mask_stack(const MaskStack& stack, MaskFormat format) {
    switch (format) {
        case MaskFormat::npy:
            return write_npy(to_npy_array(stack));
        case MaskFormat::npz:
            return write_npz({{"arr_0", to_npy_array(stack)}});
        case MaskFormat::rle: {
            const std::string text = encode_rle_stack(stack);
            return {text.begin(), text.end()};
        }
    }
    throw ContractError("unknown mask format");
}

}  // namespace grapetrack
