#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>

#include "grapetrack/sfm_model.hpp"

namespace testing {

inline std::array<double, 4> random_unit_quaternion(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    std::array<double, 4> q{n(rng), n(rng), n(rng), n(rng)};
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (auto& v : q) v /= norm;
    return q;
}

inline grapetrack::SparseModel random_model(std::mt19937_64& rng) {
    using namespace grapetrack;
    SparseModel m;
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<int> small(0, 5);
    const int n_cams = 1 + small(rng) % 3;
    for (int c = 1; c <= n_cams; ++c) {
        CameraIntrinsics cam;
        cam.camera_id = c;
        cam.model = CameraModel(small(rng) % 3);
        cam.width = 640 + 2 * small(rng);
        cam.height = 480;
        cam.fx = 300.0 + std::abs(u(rng));
        cam.fy = cam.model == CameraModel::pinhole ? 300.0 + std::abs(u(rng)) : cam.fx;
        cam.px = 320.0 + u(rng);
        cam.py = 240.0 + u(rng);
        cam.k = cam.model == CameraModel::simple_radial ? u(rng) * 1e-3 : 0.0;
        m.cameras[c] = cam;
    }
    const int n_images = small(rng) + 1;
    for (int i = 1; i <= n_images; ++i) {
        ImageRecord img;
        img.image_id = i * 3;
        img.name = "img_" + std::to_string(i) + ".jpg";
        img.rotation = random_unit_quaternion(rng);
        img.translation = {u(rng), u(rng), u(rng)};
        img.camera_id = 1 + small(rng) % n_cams;
        const int n_free = small(rng);
        for (int k = 0; k < n_free; ++k) img.observations.push_back({u(rng) + 20, u(rng) + 20, std::nullopt});
        m.images[img.image_id] = img;
    }
    const int n_points = small(rng) * 3;
    for (int p = 0; p < n_points; ++p) {
        Point3D pt;
        pt.point_id = 100 + p * 7;
        pt.xyz = {u(rng), u(rng), u(rng)};
        pt.color = {small(rng) * 40, small(rng) * 40, small(rng) * 40};
        pt.error = std::abs(u(rng)) / 7.0;
        for (auto& [id, img] : m.images) {
            if (small(rng) < 2) continue;
            pt.track.push_back({id, img.observations.size()});
            img.observations.push_back({std::abs(u(rng)) * 30, std::abs(u(rng)) * 20, pt.point_id});
        }
        m.points[pt.point_id] = pt;
    }
    return m;
}

}  // namespace testing
