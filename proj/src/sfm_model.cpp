#include "grapetrack/sfm_model.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "grapetrack/error.hpp"
#include "grapetrack/file_io.hpp"
#include "text_util.hpp"

namespace grapetrack {

std::string_view to_string(CameraModel model) {
    switch (model) {
        case CameraModel::simple_pinhole: return "SIMPLE_PINHOLE";
        case CameraModel::pinhole: return "PINHOLE";
        case CameraModel::simple_radial: return "SIMPLE_RADIAL";
    }
    return "PINHOLE";
}

const ImageRecord* SparseModel::find_image_by_name(std::string_view name) const {
    for (const auto& [id, image] : images) {
        if (image.name == name) return &image;
    }
    return nullptr;
}

std::size_t SparseModel::total_track_length() const {
    std::size_t n = 0;
    for (const auto& [id, p] : points) n += p.track.size();
    return n;
}

namespace {

struct Line {
    std::size_t number;
    std::string_view text;
};

// Non-comment lines with their 1-based line numbers. Blank lines are kept:
// images.txt uses an empty line for an image without keypoints.
std::vector<Line> data_lines(std::string_view text) {
    std::vector<Line> out;
    std::size_t n = 0;
    for (auto line : detail::split_lines(text)) {
        ++n;
        const auto t = detail::trim(line);
        if (!t.empty() && t.front() == '#') continue;
        out.push_back({n, line});
    }
    return out;
}

template <typename T>
T int_field(std::string_view tok, std::string_view file, std::size_t line) {
    T v{};
    if (!detail::parse_int(tok, v)) {
        throw ParseError(fmt::format("{}:{}: '{}' is not an integer", file, line, tok));
    }
    return v;
}

double real_field(std::string_view tok, std::string_view file, std::size_t line) {
    double v = 0.0;
    if (!detail::parse_double(tok, v)) {
        throw ParseError(fmt::format("{}:{}: '{}' is not a number", file, line, tok));
    }
    return v;
}

void parse_cameras(std::string_view text, SparseModel& model) {
    for (const auto& [n, line] : data_lines(text)) {
        const auto f = detail::split_ws(line);
        if (f.empty()) continue;
        if (f.size() < 4) throw ParseError(fmt::format("cameras.txt:{}: too few fields", n));
        CameraIntrinsics cam;
        cam.camera_id = int_field<int>(f[0], "cameras.txt", n);
        cam.width = int_field<int>(f[2], "cameras.txt", n);
        cam.height = int_field<int>(f[3], "cameras.txt", n);
        std::vector<double> params;
        for (std::size_t i = 4; i < f.size(); ++i) params.push_back(real_field(f[i], "cameras.txt", n));
        const auto expect = [&](std::size_t count) {
            if (params.size() != count) {
                throw ParseError(fmt::format("cameras.txt:{}: {} takes {} parameters, found {}", n, f[1], count,
                                             params.size()));
            }
        };
        if (f[1] == "SIMPLE_PINHOLE") {
            expect(3);
            cam.model = CameraModel::simple_pinhole;
            cam.fx = cam.fy = params[0];
            cam.px = params[1];
            cam.py = params[2];
        } else if (f[1] == "PINHOLE") {
            expect(4);
            cam.model = CameraModel::pinhole;
            cam.fx = params[0];
            cam.fy = params[1];
            cam.px = params[2];
            cam.py = params[3];
        } else if (f[1] == "SIMPLE_RADIAL") {
            expect(4);
            cam.model = CameraModel::simple_radial;
            cam.fx = cam.fy = params[0];
            cam.px = params[1];
            cam.py = params[2];
            cam.k = params[3];
        } else {
            throw ParseError(fmt::format("cameras.txt:{}: unsupported camera model '{}'", n, f[1]));
        }
        if (!model.cameras.emplace(cam.camera_id, cam).second) {
            throw ParseError(fmt::format("cameras.txt:{}: duplicate camera id {}", n, cam.camera_id));
        }
    }
}

void parse_images(std::string_view text, SparseModel& model) {
    const auto lines = data_lines(text);
    if (lines.size() % 2 != 0) {
        throw ParseError(fmt::format("images.txt: odd number of data lines ({}); each image needs two",
                                     lines.size()));
    }
    for (std::size_t i = 0; i < lines.size(); i += 2) {
        const std::size_t n = lines[i].number;
        const auto f = detail::split_ws(lines[i].text);
        if (f.size() != 10) throw ParseError(fmt::format("images.txt:{}: expected 10 fields, found {}", n, f.size()));
        ImageRecord img;
        img.image_id = int_field<int>(f[0], "images.txt", n);
        for (int k = 0; k < 4; ++k) img.rotation[k] = real_field(f[1 + k], "images.txt", n);
        for (int k = 0; k < 3; ++k) img.translation[k] = real_field(f[5 + k], "images.txt", n);
        img.camera_id = int_field<int>(f[8], "images.txt", n);
        img.name = std::string(f[9]);

        const std::size_t n2 = lines[i + 1].number;
        const auto g = detail::split_ws(lines[i + 1].text);
        if (g.size() % 3 != 0) {
            throw ParseError(fmt::format("images.txt:{}: POINTS2D field count {} is not a multiple of 3", n2, g.size()));
        }
        img.observations.reserve(g.size() / 3);
        for (std::size_t k = 0; k < g.size(); k += 3) {
            Observation obs;
            obs.x = real_field(g[k], "images.txt", n2);
            obs.y = real_field(g[k + 1], "images.txt", n2);
            const auto id = int_field<std::int64_t>(g[k + 2], "images.txt", n2);
            if (id >= 0) obs.point3d_id = id;
            img.observations.push_back(obs);
        }
        if (!model.images.emplace(img.image_id, std::move(img)).second) {
            throw ParseError(fmt::format("images.txt:{}: duplicate image id {}", n, f[0]));
        }
    }
}

void parse_points(std::string_view text, SparseModel& model) {
    for (const auto& [n, line] : data_lines(text)) {
        const auto f = detail::split_ws(line);
        if (f.empty()) continue;
        if (f.size() < 8 || (f.size() - 8) % 2 != 0) {
            throw ParseError(fmt::format("points3D.txt:{}: malformed point line", n));
        }
        Point3D p;
        p.point_id = int_field<std::int64_t>(f[0], "points3D.txt", n);
        for (int k = 0; k < 3; ++k) p.xyz[k] = real_field(f[1 + k], "points3D.txt", n);
        for (int k = 0; k < 3; ++k) p.color[k] = int_field<int>(f[4 + k], "points3D.txt", n);
        p.error = real_field(f[7], "points3D.txt", n);
        for (std::size_t k = 8; k < f.size(); k += 2) {
            TrackElement t;
            t.image_id = int_field<int>(f[k], "points3D.txt", n);
            t.observation_index = int_field<std::size_t>(f[k + 1], "points3D.txt", n);
            p.track.push_back(t);
        }
        if (!model.points.emplace(p.point_id, std::move(p)).second) {
            throw ParseError(fmt::format("points3D.txt:{}: duplicate point id {}", n, f[0]));
        }
    }
}

}  // namespace

void validate_sparse_model(const SparseModel& model) {
    for (const auto& [id, cam] : model.cameras) {
        if (!(cam.fx > 0.0 && cam.fy > 0.0)) {
            throw IntegrityError(fmt::format("camera {}: focal lengths must be positive", id));
        }
        if (!(cam.px >= 0.0 && cam.px < cam.width && cam.py >= 0.0 && cam.py < cam.height)) {
            throw IntegrityError(fmt::format("camera {}: principal point ({}, {}) outside {}x{}", id, cam.px,
                                             cam.py, cam.width, cam.height));
        }
    }
    std::set<std::string_view> names;
    for (const auto& [id, img] : model.images) {
        if (!model.cameras.contains(img.camera_id)) {
            throw IntegrityError(fmt::format("image {} references missing camera {}", id, img.camera_id));
        }
        if (!names.insert(img.name).second) {
            throw IntegrityError(fmt::format("image name '{}' is not unique", img.name));
        }
        const auto& q = img.rotation;
        const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (!(std::abs(norm - 1.0) <= 1e-6)) {
            throw IntegrityError(fmt::format("image {}: quaternion norm {} is not 1", id, norm));
        }
    }
    // Forward: every track element resolves to an observation of this point.
    std::set<std::pair<int, std::size_t>> claimed;
    for (const auto& [pid, p] : model.points) {
        for (const auto& t : p.track) {
            const auto it = model.images.find(t.image_id);
            if (it == model.images.end()) {
                throw IntegrityError(fmt::format("point {} references missing image {}", pid, t.image_id));
            }
            const auto& obs = it->second.observations;
            if (t.observation_index >= obs.size()) {
                throw IntegrityError(fmt::format("point {} references observation {} of image {}, which has {}",
                                                 pid, t.observation_index, t.image_id, obs.size()));
            }
            if (obs[t.observation_index].point3d_id != pid) {
                throw IntegrityError(fmt::format("point {}: observation {} of image {} belongs to another point",
                                                 pid, t.observation_index, t.image_id));
            }
            claimed.emplace(t.image_id, t.observation_index);
        }
    }
    // Backward: no observation points at a missing point or one whose track omits it.
    for (const auto& [id, img] : model.images) {
        for (std::size_t k = 0; k < img.observations.size(); ++k) {
            const auto& pid = img.observations[k].point3d_id;
            if (!pid) continue;
            if (!model.points.contains(*pid)) {
                throw IntegrityError(fmt::format("image {} observation {} references missing point {}", id, k, *pid));
            }
            if (!claimed.contains({id, k})) {
                throw IntegrityError(fmt::format("image {} observation {} is not in the track of point {}", id, k, *pid));
            }
        }
    }
}

SparseModel parse_sparse_model(std::string_view cameras_text, std::string_view images_text,
                               std::string_view points_text) {
    SparseModel model;
    parse_cameras(cameras_text, model);
    parse_images(images_text, model);
    parse_points(points_text, model);
    validate_sparse_model(model);
    return model;
}

SparseModel load_sparse_model(const std::filesystem::path& dir) {
    return parse_sparse_model(read_file_text(dir / "cameras.txt"), read_file_text(dir / "images.txt"),
                              read_file_text(dir / "points3D.txt"));
}

SparseModelText serialize_sparse_model(const SparseModel& model) {
    SparseModelText out;
    out.cameras =
        "# Camera list with one line of data per camera:\n"
        "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    out.cameras += fmt::format("# Number of cameras: {}\n", model.cameras.size());
    for (const auto& [id, c] : model.cameras) {
        out.cameras += fmt::format("{} {} {} {} ", id, to_string(c.model), c.width, c.height);
        switch (c.model) {
            case CameraModel::simple_pinhole: out.cameras += fmt::format("{} {} {}\n", c.fx, c.px, c.py); break;
            case CameraModel::pinhole: out.cameras += fmt::format("{} {} {} {}\n", c.fx, c.fy, c.px, c.py); break;
            case CameraModel::simple_radial:
                out.cameras += fmt::format("{} {} {} {}\n", c.fx, c.px, c.py, c.k);
                break;
        }
    }

    std::size_t n_obs = 0;
    for (const auto& [id, img] : model.images) n_obs += img.observations.size();
    const double mean_obs = model.images.empty() ? 0.0 : double(n_obs) / double(model.images.size());
    out.images =
        "# Image list with two lines of data per image:\n"
        "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
        "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    out.images += fmt::format("# Number of images: {}, mean observations per image: {}\n", model.images.size(), mean_obs);
    for (const auto& [id, img] : model.images) {
        const auto& q = img.rotation;
        const auto& t = img.translation;
        out.images += fmt::format("{} {} {} {} {} {} {} {} {} {}\n", id, q[0], q[1], q[2], q[3], t[0], t[1], t[2],
                                  img.camera_id, img.name);
        std::string row;
        for (const auto& o : img.observations) {
            if (!row.empty()) row += ' ';
            row += fmt::format("{} {} {}", o.x, o.y, o.point3d_id ? *o.point3d_id : -1);
        }
        out.images += row + '\n';
    }

    const double mean_track =
        model.points.empty() ? 0.0 : double(model.total_track_length()) / double(model.points.size());
    out.points =
        "# 3D point list with one line of data per point:\n"
        "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    out.points += fmt::format("# Number of points: {}, mean track length: {}\n", model.points.size(), mean_track);
    for (const auto& [id, p] : model.points) {
        out.points += fmt::format("{} {} {} {} {} {} {} {}", id, p.xyz[0], p.xyz[1], p.xyz[2], p.color[0], p.color[1],
                                  p.color[2], p.error);
        for (const auto& t : p.track) out.points += fmt::format(" {} {}", t.image_id, t.observation_index);
        out.points += '\n';
    }
    return out;
}

void save_sparse_model(const SparseModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto text = serialize_sparse_model(model);
    write_file(dir / "cameras.txt", text.cameras);
    write_file(dir / "images.txt", text.images);
    write_file(dir / "points3D.txt", text.points);
}

ObservationMap observations_by_image(const SparseModel& model) {
    ObservationMap out;
    for (const auto& [pid, p] : model.points) {
        for (const auto& t : p.track) {
            const auto& o = model.images.at(t.image_id).observations.at(t.observation_index);
            out[t.image_id].push_back({pid, o.x, o.y});
        }
    }
    return out;
}

std::optional<PixelPoint> reproject_point(const Point3D& point, const ImageRecord& image,
                                          const CameraIntrinsics& camera) {
    const auto finite = [](auto const& arr) {
        for (double v : arr) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    };
    if (!finite(point.xyz) || !finite(image.rotation) || !finite(image.translation)) {
        throw NumericError(fmt::format("non-finite coordinates projecting point {} into image {}", point.point_id,
                                       image.image_id));
    }
    const double w = image.rotation[0];
    const double x = image.rotation[1];
    const double y = image.rotation[2];
    const double z = image.rotation[3];
    const double r00 = 1 - 2 * (y * y + z * z), r01 = 2 * (x * y - w * z), r02 = 2 * (x * z + w * y);
    const double r10 = 2 * (x * y + w * z), r11 = 1 - 2 * (x * x + z * z), r12 = 2 * (y * z - w * x);
    const double r20 = 2 * (x * z - w * y), r21 = 2 * (y * z + w * x), r22 = 1 - 2 * (x * x + y * y);
    const auto& X = point.xyz;
    const double xc = r00 * X[0] + r01 * X[1] + r02 * X[2] + image.translation[0];
    const double yc = r10 * X[0] + r11 * X[1] + r12 * X[2] + image.translation[1];
    const double zc = r20 * X[0] + r21 * X[1] + r22 * X[2] + image.translation[2];
    if (zc <= 0.0) return std::nullopt;

    double u = xc / zc;
    double v = yc / zc;
    if (camera.model == CameraModel::simple_radial) {
        const double d = 1.0 + camera.k * (u * u + v * v);
        u *= d;
        v *= d;
    }
    return PixelPoint{camera.fx * u + camera.px, camera.fy * v + camera.py};
}

ObservationMap observations_reprojected(const SparseModel& model) {
    ObservationMap out;
    for (const auto& [pid, p] : model.points) {
        for (const auto& t : p.track) {
            const auto& img = model.images.at(t.image_id);
            const auto px = reproject_point(p, img, model.cameras.at(img.camera_id));
            if (px) out[t.image_id].push_back({pid, px->x, px->y});
        }
    }
    return out;
}

}  // namespace grapetrack
