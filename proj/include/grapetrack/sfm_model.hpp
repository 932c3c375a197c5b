#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace grapetrack {

using Vec3 = std::array<double, 3>;

enum class CameraModel { simple_pinhole, pinhole, simple_radial };

std::string_view to_string(CameraModel model);

/// Intrinsics of one COLMAP camera. `k` is the radial coefficient of
/// SIMPLE_RADIAL and zero otherwise; SIMPLE_* models keep fx == fy.
struct CameraIntrinsics {
    int camera_id = 0;
    CameraModel model = CameraModel::pinhole;
    int width = 0;
    int height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double px = 0.0;
    double py = 0.0;
    double k = 0.0;

    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// One keypoint of an image; `point3d_id` is empty for unmatched keypoints.
struct Observation {
    double x = 0.0;
    double y = 0.0;
    std::optional<std::int64_t> point3d_id;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// COLMAP pose convention: (qw, qx, qy, qz) and t map world to camera.
struct ImageRecord {
    int image_id = 0;
    std::string name;
    std::array<double, 4> rotation{1.0, 0.0, 0.0, 0.0};
    Vec3 translation{0.0, 0.0, 0.0};
    int camera_id = 0;
    std::vector<Observation> observations;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct TrackElement {
    int image_id = 0;
    std::size_t observation_index = 0;

    friend bool operator==(const TrackElement&, const TrackElement&) = default;
};

struct Point3D {
    std::int64_t point_id = 0;
    Vec3 xyz{0.0, 0.0, 0.0};
    std::array<int, 3> color{0, 0, 0};
    double error = 0.0;
    std::vector<TrackElement> track;

    friend bool operator==(const Point3D&, const Point3D&) = default;
};

struct SparseModel {
    std::map<int, CameraIntrinsics> cameras;
    std::map<int, ImageRecord> images;
    std::map<std::int64_t, Point3D> points;

    const ImageRecord* find_image_by_name(std::string_view name) const;
    std::size_t total_track_length() const;

    friend bool operator==(const SparseModel&, const SparseModel&) = default;
};

struct SparseModelText {
    std::string cameras;
    std::string images;
    std::string points;
};

/// Parses the three COLMAP text files and checks referential integrity.
///
/// Throws ParseError for grammar problems (including an odd number of image
/// lines and unknown camera models) and IntegrityError when tracks and
/// observations disagree.
SparseModel parse_sparse_model(std::string_view cameras_text, std::string_view images_text,
                               std::string_view points_text);

/// Reads cameras.txt / images.txt / points3D.txt from a directory.
SparseModel load_sparse_model(const std::filesystem::path& dir);

/// Throws on any violated model invariant. parse_sparse_model calls this.
void validate_sparse_model(const SparseModel& model);

/// Deterministic text serialization; doubles use shortest round-trip form.
SparseModelText serialize_sparse_model(const SparseModel& model);
void save_sparse_model(const SparseModel& model, const std::filesystem::path& dir);

struct PointObservation {
    std::int64_t point_id = 0;
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PointObservation&, const PointObservation&) = default;
};

using ObservationMap = std::map<int, std::vector<PointObservation>>;

/// One entry per track element, grouped by image, points in ascending id.
/// Images without any entry are absent from the map.
ObservationMap observations_by_image(const SparseModel& model);

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Projects a point through the image pose and camera. Returns nullopt when
/// the point is on or behind the image plane (Z_c <= 0). Throws NumericError
/// for non-finite input.
std::optional<PixelPoint> reproject_point(const Point3D& point, const ImageRecord& image,
                                          const CameraIntrinsics& camera);

/// Like observations_by_image, but the 2-D locations come from reprojecting
/// each track element's point. Behind-camera projections are dropped.
ObservationMap observations_reprojected(const SparseModel& model);

}  // namespace grapetrack
