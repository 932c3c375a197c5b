#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "grapetrack/association.hpp"

namespace grapetrack {

/// Reads a detections manifest: one JSON object per line,
///   {"frame_name": ..., "masks": [<RLE record>, ...] | "<npy/npz/rle path>",
///    "confidences": [...], "width": W, "height": H}
/// Frame order is line order. Paths resolve against `base_dir`. width and
/// height are optional when the frame has at least one mask.
std::vector<FrameDetections> parse_detections_manifest(std::string_view text,
                                                       const std::filesystem::path& base_dir = {});

std::vector<FrameDetections> load_detections_manifest(const std::filesystem::path& path);

/// Writes masks inline as RLE records. Byte-stable for equal inputs.
std::string format_detections_manifest(const std::vector<FrameDetections>& frames);

}  // namespace grapetrack
