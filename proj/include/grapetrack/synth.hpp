#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grapetrack/association.hpp"
#include "grapetrack/mask.hpp"
#include "grapetrack/sfm_model.hpp"

namespace grapetrack {

/// 64-bit linear congruential generator (Knuth's MMIX constants):
///   state = state * 6364136223846793005 + 1442695040888963407
/// Outputs are taken from the high bits. Seeding: state = seed, then one step.
class Lcg64 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

    explicit Lcg64(std::uint64_t seed) : state_(seed) { next(); }

    std::uint64_t next() {
        state_ = state_ * kMultiplier + kIncrement;
        return state_;
    }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return ((next() >> 32) * n) >> 32; }

private:
    std::uint64_t state_;
};

/// A row of clusters on a planar canopy at depth 4, imaged by a pinhole
/// camera (focal 256 px) that translates along +x by `camera_step` per frame.
/// One scene unit spans 64 px.
struct SceneConfig {
    int n_clusters = 9;
    int n_frames = 30;
    int points_per_cluster = 20;
    int width = 320;
    int height = 240;
    double camera_step = 0.25;
    /// Probability that a visible cluster is not detected in a frame.
    double dropout_p = 0.0;
    /// Probability that two neighboring detected clusters come out as one
    /// detection (mask union).
    double occlusion_p = 0.0;
    std::uint64_t seed = 1;
    /// Points lie within this distance (pixels) of their cluster center.
    int cluster_radius_px = 16;
    /// Points between the two cluster rows that never fall in a mask.
    int background_points = 20;
};

struct SyntheticCluster {
    int cluster_id = 0;
    std::vector<std::int64_t> point_ids;
    double center_x_px = 0.0;  // at frame 0
    double center_y_px = 0.0;
    std::vector<bool> visible;   // per frame: the whole disk is inside the raster
    std::vector<bool> detected;  // per frame: visible and not dropped
};

struct SyntheticScene {
    SceneConfig config;
    std::vector<SyntheticCluster> clusters;
    SparseModel model;
    /// What a detector reports, after dropout and occlusion merging.
    std::vector<FrameDetections> detections;
    /// detection_clusters[frame][instance] -> clusters merged into it.
    std::vector<std::vector<std::vector<int>>> detection_clusters;
    /// Unmerged masks of every visible cluster, in cluster order.
    std::vector<FrameDetections> truth_masks;

    /// Disk radius used for every cluster mask.
    double mask_radius() const { return config.cluster_radius_px + 2.0; }
    /// Frames in which a cluster is visible.
    std::vector<std::vector<int>> truth_tracks() const;
};

/// Deterministic in `cfg`. Throws ValidationError for invalid configs or a
/// scene in which no cluster is ever visible.
SyntheticScene generate_scene(const SceneConfig& cfg);

/// Clusters whose longest run of consecutive visible frames, each pair
/// sharing at least one observed point of the cluster, spans at least
/// min_edges + 1 frames. Reads only the visibility flags and the sparse
/// model's tracks.
std::size_t oracle_expected_count(const SyntheticScene& scene, int min_edges);

/// Detections with every detection's disks shifted by one random offset of
/// length <= jitter_px, in manifest form. jitter 0 reproduces the export.
std::vector<FrameDetections> perturb_detections(const SyntheticScene& scene, double jitter_px, std::uint64_t seed);

/// Fraction of cluster observations (in frames where the cluster was
/// detected) whose pixel lies inside a detection containing that cluster.
double point_in_mask_retention(const SyntheticScene& scene, const std::vector<FrameDetections>& detections);

/// Writes model/ (COLMAP text), detections.jsonl, truth.json, and gt/ (per
/// frame RLE mask stack + YOLO boxes + dims.txt).
void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

/// {"clusters": [{"id": c, "frames": [...]}]}
std::string truth_to_json(const SyntheticScene& scene);

}  // namespace grapetrack
