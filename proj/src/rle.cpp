#include "grapetrack/rle.hpp"

#include <fmt/format.h>

#include "grapetrack/error.hpp"
#include "text_util.hpp"

namespace grapetrack {

std::vector<std::uint64_t> rle_runs(std::span<const std::uint8_t> bits) {
    std::vector<std::uint64_t> runs;
    std::uint8_t current = 0;
    std::uint64_t length = 0;
    for (const std::uint8_t b : bits) {
        const std::uint8_t v = b != 0 ? 1 : 0;
        if (v != current) {
            runs.push_back(length);
            current = v;
            length = 0;
        }
        ++length;
    }
    runs.push_back(length);
    return runs;
}

std::vector<std::uint8_t> rle_expand(std::span<const std::uint64_t> runs, std::size_t size) {
    std::uint64_t total = 0;
    for (const auto r : runs) total += r;
    if (total != size) {
        throw ParseError(fmt::format("RLE runs sum to {}, expected {} pixels", total, size));
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(size);
    std::uint8_t value = 0;
    for (const auto r : runs) {
        bits.insert(bits.end(), r, value);
        value ^= 1;
    }
    return bits;
}

std::string encode_rle(const InstanceMask& mask) {
    const auto runs = rle_runs(mask.bits());
    return fmt::format("RLE v1 {} {}\n{}\n", mask.width(), mask.height(), fmt::join(runs, ","));
}

namespace {

struct RecordLines {
    std::string_view header;
    std::string_view runs;
};

InstanceMask decode_lines(const RecordLines& rec, double confidence) {
    const auto head = detail::split_ws(rec.header);
    int width = 0;
    int height = 0;
    if (head.size() != 4 || head[0] != "RLE" || head[1] != "v1" || !detail::parse_int(head[2], width) ||
        !detail::parse_int(head[3], height) || width <= 0 || height <= 0) {
        throw ParseError(fmt::format("bad RLE header '{}'", rec.header));
    }
    std::vector<std::uint64_t> runs;
    for (auto tok : detail::split_char(detail::trim(rec.runs), ',')) {
        tok = detail::trim(tok);
        std::uint64_t r = 0;
        if (!detail::parse_int(tok, r)) throw ParseError(fmt::format("bad RLE run '{}'", tok));
        runs.push_back(r);
    }
    auto bits = rle_expand(runs, std::size_t(width) * std::size_t(height));
    return InstanceMask(width, height, std::move(bits), confidence);
}

std::vector<RecordLines> split_records(std::string_view text) {
    std::vector<std::string_view> lines;
    for (auto line : detail::split_lines(text)) {
        if (!detail::trim(line).empty()) lines.push_back(line);
    }
    if (lines.size() % 2 != 0) throw ParseError("RLE text has a header without a run line");
    std::vector<RecordLines> records;
    for (std::size_t i = 0; i < lines.size(); i += 2) records.push_back({lines[i], lines[i + 1]});
    return records;
}

}  // namespace

InstanceMask decode_rle(std::string_view record, double confidence) {
    const auto records = split_records(record);
    if (records.size() != 1) {
        throw ParseError(fmt::format("expected one RLE record, found {}", records.size()));
    }
    return decode_lines(records.front(), confidence);
}

std::string encode_rle_stack(const MaskStack& stack) {
    std::string out;
    for (const auto& m : stack.masks) out += encode_rle(m);
    return out;
}

MaskStack decode_rle_stack(std::string_view text) {
    std::vector<InstanceMask> masks;
    std::size_t index = 0;
    for (const auto& rec : split_records(text)) {
        try {
            masks.push_back(decode_lines(rec, 1.0));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("slice {}: {}", index, e.what()));
        }
        ++index;
    }
    if (masks.empty()) return {};
    const int w = masks.front().width();
    const int h = masks.front().height();
    return make_mask_stack(w, h, std::move(masks));
}

}  // namespace grapetrack
