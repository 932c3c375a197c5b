#include "grapetrack/synth.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "grapetrack/boxes.hpp"
#include "grapetrack/detections.hpp"
#include "grapetrack/error.hpp"
#include "grapetrack/file_io.hpp"
#include "grapetrack/rle.hpp"

namespace grapetrack {

namespace {

// With the canopy at depth 4 and a 256 px focal length one scene unit is
// 64 px, so offsets in eighths of a pixel stay dyadic and every projection
// below is exact in binary floating point.
constexpr double kFocal = 256.0;
constexpr double kDepth = 4.0;
constexpr double kPixelsPerUnit = kFocal / kDepth;
constexpr double kRowOffsetPx = 32.0;
constexpr int kSubpixel = 8;

void validate_config(const SceneConfig& c) {
    auto fail = [](std::string msg) { throw ValidationError("scene config: " + msg); };
    if (c.n_clusters < 1) fail("n_clusters must be >= 1");
    if (c.n_frames < 1) fail("n_frames must be >= 1");
    if (c.points_per_cluster < 1) fail("points_per_cluster must be >= 1");
    if (c.background_points < 0) fail("background_points must be >= 0");
    if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
    if (!(c.occlusion_p >= 0.0 && c.occlusion_p < 1.0)) fail("occlusion_p must be in [0, 1)");
    if (!std::isfinite(c.camera_step) || c.camera_step <= 0.0) fail("camera_step must be positive");
    // Rows 64 px apart must not touch.
    if (c.cluster_radius_px < 1 || c.cluster_radius_px > 29) fail("cluster_radius_px must be in [1, 29]");
    const double r = c.cluster_radius_px + 2.0;
    if (c.width < 2 * r + 2) fail(fmt::format("width must be >= {}", 2 * r + 2));
    if (c.height < 2 * (kRowOffsetPx + r) + 2) fail(fmt::format("height must be >= {}", 2 * (kRowOffsetPx + r) + 2));
}

double project_x(double world_x, int frame, const SceneConfig& c) {
    const double t = -double(frame) * c.camera_step;
    return kFocal * ((world_x + t) / kDepth) + c.width / 2.0;
}

double project_y(double world_y, const SceneConfig& c) { return kFocal * (world_y / kDepth) + c.height / 2.0; }

std::vector<std::uint8_t> disk_bits(ImageDims dims, std::span<const std::pair<double, double>> centers, double r) {
    std::vector<std::uint8_t> bits(std::size_t(dims.width) * dims.height, 0);
    for (auto [cx, cy] : centers) {
        const int x0 = std::max(0, int(std::floor(cx - r)));
        const int x1 = std::min(dims.width - 1, int(std::ceil(cx + r)));
        const int y0 = std::max(0, int(std::floor(cy - r)));
        const int y1 = std::min(dims.height - 1, int(std::ceil(cy + r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x + 0.5 - cx;
                const double dy = y + 0.5 - cy;
                if (dx * dx + dy * dy <= r * r) bits[std::size_t(y) * dims.width + x] = 1;
            }
        }
    }
    return bits;
}

std::string frame_name(int k) { return fmt::format("frame_{:04d}.png", k); }

}  // namespace

std::vector<std::vector<int>> SyntheticScene::truth_tracks() const {
    std::vector<std::vector<int>> out;
    for (const auto& c : clusters) {
        auto& frames = out.emplace_back();
        for (int k = 0; k < int(c.visible.size()); ++k) {
            if (c.visible[k]) frames.push_back(k);
        }
    }
    return out;
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
    validate_config(cfg);
    SyntheticScene scene;
    scene.config = cfg;
    Lcg64 rng(cfg.seed);
    const ImageDims dims{cfg.width, cfg.height};
    const double r_mask = scene.mask_radius();
    const double spacing = r_mask + 4.0;

    CameraIntrinsics cam;
    cam.camera_id = 1;
    cam.model = CameraModel::pinhole;
    cam.width = cfg.width;
    cam.height = cfg.height;
    cam.fx = cam.fy = kFocal;
    cam.px = cfg.width / 2.0;
    cam.py = cfg.height / 2.0;
    scene.model.cameras[1] = cam;
    for (int k = 0; k < cfg.n_frames; ++k) {
        ImageRecord img;
        img.image_id = k + 1;
        img.name = frame_name(k);
        img.camera_id = 1;
        img.translation = {-double(k) * cfg.camera_step, 0.0, 0.0};
        scene.model.images[img.image_id] = img;
    }

    auto add_point = [&](std::int64_t id, double wx, double wy, std::array<int, 3> color, auto&& observed) {
        Point3D p;
        p.point_id = id;
        p.xyz = {wx, wy, kDepth};
        p.color = color;
        for (int k = 0; k < cfg.n_frames; ++k) {
            const double x = project_x(wx, k, cfg);
            if (!observed(k, x)) continue;
            auto& img = scene.model.images.at(k + 1);
            p.track.push_back({img.image_id, img.observations.size()});
            img.observations.push_back({x, project_y(wy, cfg), id});
        }
        if (!p.track.empty()) scene.model.points[id] = std::move(p);
    };

    // Clusters alternate between two rows; neighbors in one row are
    // 2 * spacing apart so their disks never touch.
    std::int64_t next_id = 1;
    const int sub_r = cfg.cluster_radius_px * kSubpixel;
    for (int c = 0; c < cfg.n_clusters; ++c) {
        SyntheticCluster cl;
        cl.cluster_id = c;
        cl.center_x_px = cfg.width - r_mask - 1.0 + c * spacing;
        cl.center_y_px = cfg.height / 2.0 + (c % 2 == 0 ? -kRowOffsetPx : kRowOffsetPx);
        const double wx = (cl.center_x_px - cfg.width / 2.0) / kPixelsPerUnit;
        const double wy = (cl.center_y_px - cfg.height / 2.0) / kPixelsPerUnit;
        for (int k = 0; k < cfg.n_frames; ++k) {
            const double x = project_x(wx, k, cfg);
            cl.visible.push_back(x - r_mask >= 0.0 && x + r_mask <= cfg.width);
        }
        for (int i = 0; i < cfg.points_per_cluster; ++i) {
            int dx = 0, dy = 0;
            do {
                dx = int(rng.below(2 * sub_r + 1)) - sub_r;
                dy = int(rng.below(2 * sub_r + 1)) - sub_r;
            } while (dx * dx + dy * dy > sub_r * sub_r);
            const double ox = double(dx) / (kSubpixel * kPixelsPerUnit);
            const double oy = double(dy) / (kSubpixel * kPixelsPerUnit);
            const std::int64_t id = next_id++;
            cl.point_ids.push_back(id);
            add_point(id, wx + ox, wy + oy, {128, 32, 96}, [&](int k, double) { return bool(cl.visible[k]); });
        }
        scene.clusters.push_back(std::move(cl));
    }

    // Background points sit on the band between the rows.
    const double travel = kPixelsPerUnit * cfg.camera_step * (cfg.n_frames - 1);
    for (int i = 0; i < cfg.background_points; ++i) {
        const double x0 = double(rng.below(std::uint64_t((cfg.width + travel) * kSubpixel))) / kSubpixel;
        const double y0 = cfg.height / 2.0 + (double(rng.below(16 * kSubpixel + 1)) / kSubpixel - 8.0);
        const double wx = (x0 - cfg.width / 2.0) / kPixelsPerUnit;
        const double wy = (y0 - cfg.height / 2.0) / kPixelsPerUnit;
        add_point(next_id++, wx, wy, {64, 128, 48}, [&](int, double x) { return x >= 0.0 && x < cfg.width; });
    }

    bool any_visible = false;
    for (auto& cl : scene.clusters) {
        cl.detected.assign(cfg.n_frames, false);
        for (bool v : cl.visible) any_visible = any_visible || v;
    }
    if (!any_visible) throw ValidationError("scene config: no cluster is visible in any frame");

    for (int k = 0; k < cfg.n_frames; ++k) {
        FrameDetections truth{k, frame_name(k), dims, {}};
        FrameDetections det{k, frame_name(k), dims, {}};
        auto& groups = scene.detection_clusters.emplace_back();
        std::vector<int> detected;
        for (auto& cl : scene.clusters) {
            if (!cl.visible[k]) continue;
            const double x = project_x((cl.center_x_px - cfg.width / 2.0) / kPixelsPerUnit, k, cfg);
            const std::pair<double, double> center{x, cl.center_y_px};
            truth.instances.emplace_back(cfg.width, cfg.height, disk_bits(dims, {&center, 1}, r_mask));
            if (rng.uniform() >= cfg.dropout_p) {
                detected.push_back(cl.cluster_id);
                cl.detected[k] = true;
            }
        }
        for (std::size_t i = 0; i < detected.size(); ++i) {
            std::vector<int> group{detected[i]};
            if (i + 1 < detected.size() && detected[i + 1] == detected[i] + 1 && rng.uniform() < cfg.occlusion_p) {
                group.push_back(detected[++i]);
            }
            std::vector<std::pair<double, double>> centers;
            for (int c : group) {
                const auto& cl = scene.clusters[c];
                centers.emplace_back(project_x((cl.center_x_px - cfg.width / 2.0) / kPixelsPerUnit, k, cfg),
                                     cl.center_y_px);
            }
            const double conf = 1.0 - double(rng.below(51)) / 1024.0;
            det.instances.emplace_back(cfg.width, cfg.height, disk_bits(dims, centers, r_mask), conf);
            groups.push_back(std::move(group));
        }
        scene.truth_masks.push_back(std::move(truth));
        scene.detections.push_back(std::move(det));
    }
    return scene;
}

std::size_t oracle_expected_count(const SyntheticScene& scene, int min_edges) {
    // Image id k + 1 is frame k by construction.
    std::size_t count = 0;
    for (const auto& cl : scene.clusters) {
        std::vector<std::set<int>> frames_of_point;
        for (auto id : cl.point_ids) {
            auto& s = frames_of_point.emplace_back();
            auto it = scene.model.points.find(id);
            if (it == scene.model.points.end()) continue;
            for (const auto& el : it->second.track) s.insert(el.image_id - 1);
        }
        auto linked = [&](int a, int b) {
            for (const auto& s : frames_of_point) {
                if (s.contains(a) && s.contains(b)) return true;
            }
            return false;
        };
        int best = 0, run = 0, prev = -2;
        for (int k = 0; k < int(cl.visible.size()); ++k) {
            if (!cl.visible[k]) continue;
            run = (prev == k - 1 && linked(prev, k)) ? run + 1 : 1;
            best = std::max(best, run);
            prev = k;
        }
        if (best >= min_edges + 1) ++count;
    }
    return count;
}

std::vector<FrameDetections> perturb_detections(const SyntheticScene& scene, double jitter_px, std::uint64_t seed) {
    const auto& cfg = scene.config;
    const double r_mask = scene.mask_radius();
    if (!(jitter_px >= 0.0 && jitter_px < r_mask)) {
        throw ValidationError(fmt::format("jitter must be in [0, {})", r_mask));
    }
    Lcg64 rng(seed);
    std::vector<FrameDetections> out;
    for (std::size_t k = 0; k < scene.detections.size(); ++k) {
        const auto& src = scene.detections[k];
        FrameDetections f{src.frame_index, src.frame_name, src.dims, {}};
        for (std::size_t i = 0; i < src.instances.size(); ++i) {
            double ox = 0.0, oy = 0.0;
            if (jitter_px > 0.0) {
                do {
                    ox = (2.0 * rng.uniform() - 1.0) * jitter_px;
                    oy = (2.0 * rng.uniform() - 1.0) * jitter_px;
                } while (ox * ox + oy * oy > jitter_px * jitter_px);
            }
            std::vector<std::pair<double, double>> centers;
            for (int c : scene.detection_clusters[k][i]) {
                const auto& cl = scene.clusters[c];
                centers.emplace_back(
                    project_x((cl.center_x_px - cfg.width / 2.0) / kPixelsPerUnit, int(k), cfg) + ox,
                    cl.center_y_px + oy);
            }
            f.instances.emplace_back(cfg.width, cfg.height, disk_bits(src.dims, centers, r_mask),
                                     src.instances[i].confidence());
        }
        out.push_back(std::move(f));
    }
    return out;
}

double point_in_mask_retention(const SyntheticScene& scene, const std::vector<FrameDetections>& detections) {
    if (detections.size() != scene.detection_clusters.size()) {
        throw ContractError("retention: detections do not align with the scene");
    }
    const auto obs = observations_by_image(scene.model);
    std::size_t total = 0, kept = 0;
    for (std::size_t k = 0; k < detections.size(); ++k) {
        const auto& groups = scene.detection_clusters[k];
        if (detections[k].instances.size() != groups.size()) {
            throw ContractError("retention: detections do not align with the scene");
        }
        auto it = obs.find(int(k) + 1);
        if (it == obs.end()) continue;
        std::map<std::int64_t, std::pair<double, double>> where;
        for (const auto& o : it->second) where[o.point_id] = {o.x, o.y};
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const auto& mask = detections[k].instances[i];
            for (int c : groups[i]) {
                for (auto id : scene.clusters[c].point_ids) {
                    auto w = where.find(id);
                    if (w == where.end()) continue;
                    ++total;
                    const int x = int(std::floor(w->second.first));
                    const int y = int(std::floor(w->second.second));
                    if (x >= 0 && y >= 0 && x < mask.width() && y < mask.height() && mask.test(x, y)) ++kept;
                }
            }
        }
    }
    return total == 0 ? 1.0 : double(kept) / double(total);
}

std::string truth_to_json(const SyntheticScene& scene) {
    nlohmann::ordered_json j;
    j["clusters"] = nlohmann::ordered_json::array();
    const auto tracks = scene.truth_tracks();
    for (std::size_t c = 0; c < tracks.size(); ++c) {
        nlohmann::ordered_json e;
        e["id"] = c;
        e["frames"] = tracks[c];
        j["clusters"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "gt", ec);
    if (ec) throw ValidationError(fmt::format("cannot create '{}': {}", (dir / "gt").string(), ec.message()));
    save_sparse_model(scene.model, dir / "model");
    write_file(dir / "detections.jsonl", format_detections_manifest(scene.detections));
    write_file(dir / "truth.json", truth_to_json(scene));
    std::string dims_manifest;
    for (const auto& f : scene.truth_masks) {
        const std::string stem = fs::path(f.frame_name).stem().string();
        std::vector<BoundingBox> boxes;
        for (const auto& m : f.instances) boxes.push_back(m.box());
        write_file(dir / "gt" / (stem + ".txt"), format_yolo_boxes(boxes));
        write_file(dir / "gt" / (stem + ".rle"), encode_rle_stack(make_mask_stack(f.dims.width, f.dims.height, f.instances)));
        dims_manifest += fmt::format("{} {} {}\n", stem, f.dims.width, f.dims.height);
    }
    write_file(dir / "gt" / "dims.txt", dims_manifest);
}

}  // namespace grapetrack
