#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grapetrack/mask.hpp"
#include "grapetrack/sfm_model.hpp"

namespace grapetrack {

/// Instances detected in one keyframe. `frame_index` is the position in the
/// ordered keyframe list, not the SfM image id.
struct FrameDetections {
    int frame_index = 0;
    std::string frame_name;
    ImageDims dims;
    std::vector<InstanceMask> instances;
};

/// Instance `instance` of frame `frame`.
struct NodeId {
    int frame = 0;
    int instance = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct GraphEdge {
    NodeId from;
    NodeId to;  // to.frame > from.frame
    std::uint32_t weight = 0;

    int gap() const { return to.frame - from.frame; }
    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Directed instance graph. Nodes are every (frame, instance) pair; edges
/// are kept sorted by (from, to) and always point forward in time, so the
/// graph is acyclic.
struct TrackGraph {
    std::vector<NodeId> nodes;
    std::vector<GraphEdge> edges;

    std::uint64_t total_weight() const;
    friend bool operator==(const TrackGraph&, const TrackGraph&) = default;
};

struct GraphOptions {
    /// Largest frame gap an edge may span; nullopt means unbounded.
    std::optional<int> window;
    /// Worker threads for the per-point accumulation. Results do not depend
    /// on this value.
    unsigned threads = 1;
    /// Fraction of observations allowed to fall more than one pixel outside
    /// the raster before the inputs are declared mismatched.
    double max_out_of_raster_fraction = 0.05;
};

/// Links instances of two frames with one unit of weight per 3-D point whose
/// observations fall inside both masks. `frame_to_image` maps frame_name to
/// the SfM image id. Throws ValidationError when a frame does not resolve or
/// when too many observations land outside the frame raster.
TrackGraph build_graph(std::span<const FrameDetections> frames, const ObservationMap& observations,
                       const std::map<std::string, int>& frame_to_image, const GraphOptions& options = {});

/// Keeps at most one incoming and one outgoing edge per node. Edges are
/// admitted greedily by descending weight, then ascending frame gap, then
/// ascending (from, to).
TrackGraph filter_edges(const TrackGraph& graph);

struct TrackSet {
    std::vector<std::vector<NodeId>> tracks;
    int min_edges = 5;
};

/// Walks each chain from its head (nodes in ascending order) and keeps the
/// chains with at least `min_edges` edges. Throws ContractError when a node
/// has more than one incoming or outgoing edge.
TrackSet extract_tracks(const TrackGraph& filtered, int min_edges = 5);

struct TrackAnnotation {
    std::size_t count = 0;
    /// labels[frame][instance] -> track id.
    std::vector<std::vector<std::optional<int>>> labels;
};

TrackAnnotation count_and_annotate(const TrackSet& tracks, std::span<const FrameDetections> frames);

enum class ProjectionMode { observed, reprojected };

std::optional<ProjectionMode> parse_projection_mode(std::string_view name);

struct TrackingOptions {
    GraphOptions graph;
    int min_edges = 5;
    /// Instances below this confidence are dropped before the graph is
    /// built; nullopt keeps every instance.
    std::optional<double> confidence_threshold = 0.9;
    ProjectionMode projection = ProjectionMode::observed;
};

struct TrackingResult {
    TrackGraph graph;
    TrackGraph filtered;
    /// Nodes refer to the instance positions of the input frames.
    TrackSet tracks;
    TrackAnnotation annotation;
};

/// Resolves frame names to SfM images by file-name stem. Throws
/// ValidationError listing every unmatched frame name.
std::map<std::string, int> match_frames_to_images(std::span<const FrameDetections> frames, const SparseModel& model);

/// Full association: confidence filter, graph, degree filter, tracks, labels.
TrackingResult run_tracking(const SparseModel& model, std::span<const FrameDetections> frames,
                            const TrackingOptions& options);

/// {count, min_edges, tracks: [{track_id, nodes: [{frame_name, instance_index}]}]}
std::string tracks_to_json(const TrackSet& tracks, std::span<const FrameDetections> frames);
/// frame_name,instance_index,track_id (empty track_id when unassigned).
std::string labels_to_csv(const TrackAnnotation& annotation, std::span<const FrameDetections> frames);

}  // namespace grapetrack
