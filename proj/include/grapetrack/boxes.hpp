#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace grapetrack {

struct ImageDims {
    int width = 0;
    int height = 0;

    friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Axis-aligned box in absolute pixel units, (x, y) is the top-left corner.
struct PixelBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
};

/// One line of a YOLO annotation: class id plus center/extent normalized by
/// the image dimensions.
struct BoundingBox {
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    double confidence = 1.0;

    PixelBox to_pixels(ImageDims dims) const;
    static BoundingBox from_pixels(const PixelBox& box, ImageDims dims, int class_id = 0,
                                   double confidence = 1.0);
};

struct ParseWarning {
    std::size_t line = 0;  // 1-based; 0 when not tied to a line
    std::string message;
};

struct BoxList {
    std::vector<BoundingBox> boxes;
    std::vector<ParseWarning> warnings;
};

/// Normalized coordinates may overshoot [0, 1] by at most this much before
/// they are treated as hard errors instead of being clamped.
inline constexpr double kClampTolerance = 0.01;

/// Parses "CLASS CX CY W H" lines. A sixth column, when present, is read as a
/// detection confidence (prediction files); ground truth gets 1.0.
///
/// Throws ParseError (with the 1-based line number) on malformed lines and on
/// values outside the clamp tolerance, ValidationError on non-positive dims.
BoxList parse_yolo_boxes(std::string_view text, ImageDims dims);

/// Writes boxes back in YOLO layout. Confidence is emitted as a sixth column
/// only when `with_confidence` is set.
std::string format_yolo_boxes(const std::vector<BoundingBox>& boxes, bool with_confidence = false);

}  // namespace grapetrack
