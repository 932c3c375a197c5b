#include "grapetrack/detections.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "grapetrack/error.hpp"
#include "grapetrack/file_io.hpp"
#include "grapetrack/mask_io.hpp"
#include "grapetrack/rle.hpp"
#include "text_util.hpp"

namespace grapetrack {

std::vector<FrameDetections> parse_detections_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    std::vector<FrameDetections> frames;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("manifest line {}: {}", line_no, e.what()));
        }
        try {
            FrameDetections f;
            f.frame_index = int(frames.size());
            f.frame_name = j.at("frame_name").get<std::string>();
            if (j.contains("width")) f.dims.width = j.at("width").get<int>();
            if (j.contains("height")) f.dims.height = j.at("height").get<int>();

            std::vector<InstanceMask> masks;
            const auto& m = j.at("masks");
            if (m.is_string()) {
                const std::filesystem::path p = base_dir / m.get<std::string>();
                const auto format = mask_format_for(p.string());
                if (!format) throw ValidationError(fmt::format("unknown mask file type '{}'", p.string()));
                masks = load_mask_stack(read_file_bytes(p), *format).masks;
            } else {
                for (const auto& rec : m) masks.push_back(decode_rle(rec.get<std::string>()));
            }
            std::vector<double> conf(masks.size(), 1.0);
            if (j.contains("confidences")) {
                conf = j.at("confidences").get<std::vector<double>>();
                if (conf.size() != masks.size()) {
                    throw ValidationError(fmt::format("{} confidences for {} masks", conf.size(), masks.size()));
                }
            }
            for (std::size_t k = 0; k < masks.size(); ++k) {
                if (f.dims.width == 0 && f.dims.height == 0) f.dims = masks[k].dims();
                if (masks[k].dims() != f.dims) throw ValidationError("masks of one frame differ in size");
                f.instances.push_back(masks[k].with_confidence(conf[k]));
            }
            frames.push_back(std::move(f));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("manifest line {}: {}", line_no, e.what()));
        } catch (const Error& e) {
            throw ValidationError(fmt::format("manifest line {}: {}", line_no, e.what()));
        }
    }
    return frames;
}

std::vector<FrameDetections> load_detections_manifest(const std::filesystem::path& path) {
    return parse_detections_manifest(read_file_text(path), path.parent_path());
}

std::string format_detections_manifest(const std::vector<FrameDetections>& frames) {
    std::string out;
    for (const auto& f : frames) {
        nlohmann::ordered_json j;
        j["frame_name"] = f.frame_name;
        j["width"] = f.dims.width;
        j["height"] = f.dims.height;
        j["masks"] = nlohmann::ordered_json::array();
        j["confidences"] = nlohmann::ordered_json::array();
        for (const auto& m : f.instances) {
            j["masks"].push_back(encode_rle(m));
            j["confidences"].push_back(m.confidence());
        }
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace grapetrack
