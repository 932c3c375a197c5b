#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "grapetrack/image.hpp"
#include "grapetrack/mask.hpp"

namespace grapetrack {

/// Dense region labels 0..count-1 over a crop; every region is non-empty and
/// 4-connected.
struct RegionMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;
    int count = 0;

    int at(int x, int y) const { return labels[std::size_t(y) * width + x]; }
};

/// Watershed over-segmentation of a luminance crop. The morphological
/// gradient is flooded from the regional minima that survive h-minima
/// suppression at depth `h_min`. Pixels contested at the same relief level
/// join the basin whose marker mean luminance is closest, so there is no
/// ridge label and every pixel ends up in exactly one region.
RegionMap watershed_oversegment(const GrayImage& crop, double h_min = 8.0);

struct RegionVertex {
    std::array<double, 3> mean_color{0.0, 0.0, 0.0};
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    std::size_t pixel_count = 0;
};

/// Adjacent regions a < b; (dx, dy) is centroid(b) - centroid(a) divided by
/// the crop diagonal.
struct RegionEdge {
    int a = 0;
    int b = 0;
    double dx = 0.0;
    double dy = 0.0;
};

/// Attributed relational graph over the regions of a crop.
struct RegionGraph {
    std::vector<RegionVertex> vertices;
    std::vector<RegionEdge> edges;
    double diagonal = 0.0;
};

RegionGraph build_arg(const RegionMap& regions, const RgbImage& crop);

enum class SegLabel { background, grape };

struct Stroke {
    SegLabel label = SegLabel::grape;
    std::vector<std::array<int, 2>> pixels;  // (x, y)
};

struct ScribbleSet {
    std::vector<Stroke> strokes;
};

/// {"strokes": [{"label": "grape"|"background", "pixels": [[x, y], ...]}]}
ScribbleSet parse_scribbles(std::string_view json_text);

/// Scribbled regions take their majority label (ties go to background).
/// Every other region copies the label of the scribbled region minimizing
///   |color_u - color_m| / 255 + lambda_spatial * |centroid_u - centroid_m| / diagonal
/// (ties: lower region id). Throws ValidationError when either label covers
/// no region or a scribble pixel lies outside the crop.
std::vector<SegLabel> propagate_labels(const RegionGraph& arg, const ScribbleSet& scribbles,
                                       const RegionMap& regions, double lambda_spatial = 0.5);

/// Union of grape regions clipped to `bbox`, as a mask over the crop raster.
/// Throws ValidationError when nothing remains.
InstanceMask extract_instance_mask(std::span<const SegLabel> labels, const RegionMap& regions, const PixelRect& bbox);

struct ScribbleOptions {
    double h_min = 8.0;
    double lambda_spatial = 0.5;
    /// Defaults to the whole crop.
    std::optional<PixelRect> bbox;
};

/// The whole chain: luminance, watershed, ARG, propagation, mask.
InstanceMask segment_with_scribbles(const RgbImage& crop, const ScribbleSet& scribbles,
                                    const ScribbleOptions& options = {});

}  // namespace grapetrack
