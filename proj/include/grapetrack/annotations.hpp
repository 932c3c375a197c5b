#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "grapetrack/association.hpp"
#include "grapetrack/metrics.hpp"

namespace grapetrack {

struct AnnotationSet {
    std::vector<ImageSample> samples;  // sorted by image id
    std::vector<std::string> warnings;
};

/// Reads every <id>.txt box file in `dir` (split lists and dims.txt are
/// skipped) plus the matching <id>.npz/.npy/.rle mask stack when present.
/// Image files are not needed. Dimensions come from dims.txt, else from the
/// mask stack; an image with neither is a ValidationError. Box line i pairs
/// with mask slice i, so their counts must agree. A sixth box column is read
/// as the confidence and copied onto the paired mask.
AnnotationSet load_annotation_dir(const std::filesystem::path& dir);

/// One sample per frame; image id is the frame-name stem and boxes are the
/// tight boxes of the masks.
std::vector<ImageSample> samples_from_detections(const std::vector<FrameDetections>& frames);

/// A directory goes through load_annotation_dir, anything else is read as a
/// detections manifest.
AnnotationSet load_samples(const std::filesystem::path& path);

}  // namespace grapetrack
