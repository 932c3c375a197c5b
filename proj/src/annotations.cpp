#include "grapetrack/annotations.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "grapetrack/boxes.hpp"
#include "grapetrack/detections.hpp"
#include "grapetrack/error.hpp"
#include "grapetrack/file_io.hpp"
#include "grapetrack/mask_io.hpp"
#include "grapetrack/dataset_index.hpp"

namespace grapetrack {

namespace fs = std::filesystem;

AnnotationSet load_annotation_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError(fmt::format("directory '{}' does not exist", dir.string()));
    std::map<std::string, fs::path> box_files;
    std::map<std::string, fs::path> mask_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        const auto id = entry.path().stem().string();
        if (entry.path().extension() == ".txt") {
            if (name == "train.txt" || name == "test.txt" || name == "dims.txt" || name.ends_with("_masked.txt")) {
                continue;
            }
            box_files[id] = entry.path();
        } else if (mask_format_for(name)) {
            if (!mask_files.emplace(id, entry.path()).second) {
                throw ValidationError(fmt::format("image '{}' has more than one mask file", id));
            }
        }
    }
    for (const auto& [id, path] : mask_files) {
        if (!box_files.contains(id)) throw ValidationError(fmt::format("mask file '{}' has no box file", path.string()));
    }

    std::map<std::string, ImageDims> dims;
    if (fs::exists(dir / "dims.txt")) dims = parse_dims_manifest(read_file_text(dir / "dims.txt"));

    AnnotationSet out;
    for (const auto& [id, box_path] : box_files) {
        ImageSample s;
        s.image_id = id;
        std::optional<MaskStack> stack;
        if (auto it = mask_files.find(id); it != mask_files.end()) {
            std::optional<ImageDims> expected;
            if (auto d = dims.find(id); d != dims.end()) expected = d->second;
            try {
                stack = load_mask_stack(read_file_bytes(it->second), *mask_format_for(it->second.string()), expected);
            } catch (const Error& e) {
                throw ValidationError(fmt::format("{}: {}", it->second.string(), e.what()));
            }
        }
        if (auto d = dims.find(id); d != dims.end()) {
            s.dims = d->second;
        } else if (stack && stack->n_clusters() > 0) {
            s.dims = {stack->width, stack->height};
        } else {
            throw ValidationError(fmt::format("no dimensions for image '{}': add it to dims.txt or supply masks", id));
        }

        BoxList boxes;
        try {
            boxes = parse_yolo_boxes(read_file_text(box_path), s.dims);
        } catch (const Error& e) {
            throw ValidationError(fmt::format("{}: {}", box_path.string(), e.what()));
        }
        for (const auto& w : boxes.warnings) {
            out.warnings.push_back(fmt::format("{}:{}: {}", box_path.string(), w.line, w.message));
        }
        for (const auto& b : boxes.boxes) s.boxes.push_back({b.to_pixels(s.dims), b.confidence});
        if (stack) {
            if (stack->masks.size() != s.boxes.size()) {
                throw ValidationError(fmt::format("image '{}': {} boxes but {} mask slices", id, s.boxes.size(),
                                                  stack->masks.size()));
            }
            if (stack->overlap_pixels > 0) {
                out.warnings.push_back(fmt::format("image '{}': {} pixels belong to more than one mask", id,
                                                   stack->overlap_pixels));
            }
            std::vector<InstanceMask> masks;
            for (std::size_t i = 0; i < stack->masks.size(); ++i) {
                masks.push_back(stack->masks[i].with_confidence(s.boxes[i].confidence));
            }
            s.masks = std::move(masks);
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

std::vector<ImageSample> samples_from_detections(const std::vector<FrameDetections>& frames) {
    std::vector<ImageSample> out;
    for (const auto& f : frames) {
        ImageSample s;
        s.image_id = fs::path(f.frame_name).stem().string();
        s.dims = f.dims;
        for (const auto& m : f.instances) s.boxes.push_back({m.tight_box().to_box(), m.confidence()});
        s.masks = f.instances;
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
    return out;
}

AnnotationSet load_samples(const fs::path& path) {
    if (fs::is_directory(path)) return load_annotation_dir(path);
    if (!fs::exists(path)) throw ValidationError(fmt::format("'{}' does not exist", path.string()));
    return {samples_from_detections(load_detections_manifest(path)), {}};
}

}  // namespace grapetrack
