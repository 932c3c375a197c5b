#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grapetrack/boxes.hpp"

namespace grapetrack {

enum class Split { train, test, unassigned };

std::string_view to_string(Split split);

struct DatasetEntry {
    std::string image_id;
    std::string variety_prefix;  // file-name prefix before the first '_'
    bool has_masks = false;
    Split split = Split::unassigned;
};

struct DatasetIndex {
    std::vector<DatasetEntry> entries;  // sorted by image_id
    std::map<std::string, ImageDims> image_dims;

    const DatasetEntry* find(std::string_view image_id) const;
    /// Images per variety prefix.
    std::map<std::string, std::size_t> variety_counts() const;
    std::size_t count(Split split) const;
};

/// Grape variety for a WGISD prefix ("CDY" -> "Chardonnay"), or "unknown".
std::string_view variety_name(std::string_view prefix);

/// Builds the index from a flat directory listing (file names only) plus the
/// text of the train/test split lists and an optional "id width height" dims
/// manifest. Images are *.jpg/*.jpeg/*.png/*.ppm; boxes are <id>.txt; masks
/// are <id>.npz/.npy/.rle.
///
/// Throws ValidationError for a split id without an image file, duplicate
/// ids, an id listed in both splits, or a mask file without a box file.
DatasetIndex load_dataset_index(std::span<const std::string> listing, std::string_view train_list,
                                std::string_view test_list, std::string_view dims_manifest = {});

/// Reads `root` and its train.txt / test.txt / dims.txt (each optional).
DatasetIndex load_dataset_dir(const std::filesystem::path& root);

/// Parses "id width height" lines ('#' comments allowed).
std::map<std::string, ImageDims> parse_dims_manifest(std::string_view text);

}  // namespace grapetrack
