#include "grapetrack/dataset_index.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "grapetrack/error.hpp"
#include "text_util.hpp"

namespace grapetrack {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

const DatasetEntry* DatasetIndex::find(std::string_view image_id) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), image_id,
                                     [](const DatasetEntry& e, std::string_view id) { return e.image_id < id; });
    return it != entries.end() && it->image_id == image_id ? &*it : nullptr;
}

std::map<std::string, std::size_t> DatasetIndex::variety_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : entries) ++counts[e.variety_prefix];
    return counts;
}

std::size_t DatasetIndex::count(Split split) const {
    return std::size_t(std::count_if(entries.begin(), entries.end(),
                                     [split](const DatasetEntry& e) { return e.split == split; }));
}

std::string_view variety_name(std::string_view prefix) {
    if (prefix == "CDY") return "Chardonnay";
    if (prefix == "CFR") return "Cabernet Franc";
    if (prefix == "CSV") return "Cabernet Sauvignon";
    if (prefix == "SVB") return "Sauvignon Blanc";
    if (prefix == "SYH") return "Syrah";
    return "unknown";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view extension(std::string_view name) {
    const auto dot = name.rfind('.');
    return dot == std::string_view::npos ? std::string_view{} : name.substr(dot);
}

std::vector<std::string> read_split(std::string_view text, std::string_view which) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (auto line : detail::split_lines(text)) {
        line = detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::string id(detail::stem(line));
        if (!seen.insert(id).second) {
            throw ValidationError(fmt::format("duplicate id '{}' in {} split", id, which));
        }
        ids.push_back(std::move(id));
    }
    return ids;
}

}  // namespace

std::map<std::string, ImageDims> parse_dims_manifest(std::string_view text) {
    std::map<std::string, ImageDims> dims;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto f = detail::split_ws(line);
        ImageDims d;
        if (f.size() != 3 || !detail::parse_int(f[1], d.width) || !detail::parse_int(f[2], d.height) ||
            d.width <= 0 || d.height <= 0) {
            throw ParseError(fmt::format("dims manifest line {}: expected 'id width height'", line_no));
        }
        if (!dims.emplace(std::string(detail::stem(f[0])), d).second) {
            throw ValidationError(fmt::format("dims manifest lists '{}' twice", f[0]));
        }
    }
    return dims;
}

DatasetIndex load_dataset_index(std::span<const std::string> listing, std::string_view train_list,
                                std::string_view test_list, std::string_view dims_manifest) {
    std::set<std::string> images;
    std::set<std::string> box_files;
    std::set<std::string> mask_files;
    for (const auto& name : listing) {
        const std::string ext = lower(extension(name));
        const std::string id(detail::stem(name));
        if (ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".ppm") {
            if (!images.insert(id).second) throw ValidationError(fmt::format("duplicate image id '{}'", id));
        } else if (ext == ".txt") {
            box_files.insert(id);
        } else if (ext == ".npz" || ext == ".npy" || ext == ".rle") {
            if (!mask_files.insert(id).second) {
                throw ValidationError(fmt::format("image '{}' has more than one mask file", id));
            }
        }
    }

    DatasetIndex index;
    index.image_dims = parse_dims_manifest(dims_manifest);
    std::map<std::string, Split> split_of;
    const auto assign = [&](std::string_view text, Split split) {
        for (auto& id : read_split(text, to_string(split))) {
            if (!images.contains(id)) {
                throw ValidationError(fmt::format("{} split references '{}' but no image file exists", to_string(split), id));
            }
            if (!split_of.emplace(id, split).second) {
                throw ValidationError(fmt::format("'{}' appears in both train and test splits", id));
            }
        }
    };
    assign(train_list, Split::train);
    assign(test_list, Split::test);

    for (const auto& id : mask_files) {
        if (!images.contains(id)) throw ValidationError(fmt::format("mask file for '{}' has no image", id));
        if (!box_files.contains(id)) throw ValidationError(fmt::format("masked image '{}' has no box file", id));
    }
    for (const auto& id : images) {
        DatasetEntry e;
        e.image_id = id;
        e.variety_prefix = id.substr(0, id.find('_'));
        e.has_masks = mask_files.contains(id);
        const auto it = split_of.find(id);
        e.split = it == split_of.end() ? Split::unassigned : it->second;
        index.entries.push_back(std::move(e));
    }
    return index;
}

namespace {

std::string slurp_optional(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

DatasetIndex load_dataset_dir(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
        throw ValidationError(fmt::format("dataset directory '{}' does not exist", root.string()));
    }
    std::vector<std::string> listing;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == "train.txt" || name == "test.txt" || name == "dims.txt" || name.ends_with("_masked.txt")) {
            continue;
        }
        listing.push_back(name);
    }
    std::sort(listing.begin(), listing.end());
    return load_dataset_index(listing, slurp_optional(root / "train.txt"), slurp_optional(root / "test.txt"),
                              slurp_optional(root / "dims.txt"));
}

}  // namespace grapetrack
