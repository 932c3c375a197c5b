#include "grapetrack/boxes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "grapetrack/error.hpp"
#include "text_util.hpp"

namespace grapetrack {

PixelBox BoundingBox::to_pixels(ImageDims dims) const {
    const double pw = w * dims.width;
    const double ph = h * dims.height;
    return {cx * dims.width - 0.5 * pw, cy * dims.height - 0.5 * ph, pw, ph};
}

BoundingBox BoundingBox::from_pixels(const PixelBox& box, ImageDims dims, int class_id,
                                     double confidence) {
    BoundingBox b;
    b.class_id = class_id;
    b.cx = box.center_x() / dims.width;
    b.cy = box.center_y() / dims.height;
    b.w = box.w / dims.width;
    b.h = box.h / dims.height;
    b.confidence = confidence;
    return b;
}

namespace {

double clamp_unit(double v, const char* field, std::size_t line, std::vector<ParseWarning>& warnings) {
    if (v >= 0.0 && v <= 1.0) return v;
    if (v < -kClampTolerance || v > 1.0 + kClampTolerance || !std::isfinite(v)) {
        throw ParseError(fmt::format("line {}: {} = {} is outside [0, 1]", line, field, v));
    }
    const double clamped = std::clamp(v, 0.0, 1.0);
    warnings.push_back({line, fmt::format("{} = {} clamped to {}", field, v, clamped)});
    return clamped;
}

}  // namespace

BoxList parse_yolo_boxes(std::string_view text, ImageDims dims) {
    if (dims.width <= 0 || dims.height <= 0) {
        throw ValidationError(fmt::format("image dimensions must be positive, got {}x{}", dims.width,
                                          dims.height));
    }
    BoxList out;
    std::size_t line_no = 0;
    for (std::string_view line : detail::split_lines(text)) {
        ++line_no;
        const auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        if (fields.size() != 5 && fields.size() != 6) {
            throw ParseError(fmt::format("line {}: expected 5 fields, found {}", line_no, fields.size()));
        }
        BoundingBox b;
        if (!detail::parse_int(fields[0], b.class_id)) {
            throw ParseError(fmt::format("line {}: class '{}' is not an integer", line_no, fields[0]));
        }
        double v[5] = {0, 0, 0, 0, 1.0};
        for (std::size_t k = 1; k < fields.size(); ++k) {
            if (!detail::parse_double(fields[k], v[k - 1])) {
                throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, fields[k]));
            }
        }
        b.cx = clamp_unit(v[0], "cx", line_no, out.warnings);
        b.cy = clamp_unit(v[1], "cy", line_no, out.warnings);
        b.w = clamp_unit(v[2], "w", line_no, out.warnings);
        b.h = clamp_unit(v[3], "h", line_no, out.warnings);
        if (fields.size() == 6) b.confidence = clamp_unit(v[4], "confidence", line_no, out.warnings);
        if (b.w <= 0.0 || b.h <= 0.0) {
            throw ParseError(fmt::format("line {}: zero-extent box (w = {}, h = {})", line_no, b.w, b.h));
        }

        // Boxes may poke out of the image by one pixel; anything more is clipped.
        PixelBox px = b.to_pixels(dims);
        const double x1 = px.x + px.w;
        const double y1 = px.y + px.h;
        if (px.x < -1.0 || px.y < -1.0 || x1 > dims.width + 1.0 || y1 > dims.height + 1.0) {
            const double nx0 = std::max(px.x, 0.0);
            const double ny0 = std::max(px.y, 0.0);
            const double nx1 = std::min(x1, static_cast<double>(dims.width));
            const double ny1 = std::min(y1, static_cast<double>(dims.height));
            if (nx1 <= nx0 || ny1 <= ny0) {
                throw ParseError(fmt::format("line {}: box lies outside the image", line_no));
            }
            out.warnings.push_back({line_no, "box exceeds image bounds; clipped"});
            b = BoundingBox::from_pixels({nx0, ny0, nx1 - nx0, ny1 - ny0}, dims, b.class_id,
                                         b.confidence);
        }
        out.boxes.push_back(b);
    }
    return out;
}

std::string format_yolo_boxes(const std::vector<BoundingBox>& boxes, bool with_confidence) {
    std::string out;
    for (const auto& b : boxes) {
        out += fmt::format("{} {} {} {} {}", b.class_id, b.cx, b.cy, b.w, b.h);
        if (with_confidence) out += fmt::format(" {}", b.confidence);
        out += '\n';
    }
    return out;
}

}  // namespace grapetrack
