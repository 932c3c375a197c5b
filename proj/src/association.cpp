#include "grapetrack/association.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "grapetrack/error.hpp"
#include "text_util.hpp"

namespace grapetrack {

std::uint64_t TrackGraph::total_weight() const {
    std::uint64_t w = 0;
    for (const auto& e : edges) w += e.weight;
    return w;
}

namespace {

// One observation of a point, resolved to a frame.
struct FrameHit {
    std::int64_t point_id;
    int frame;
    double x;
    double y;
};

using EdgeKey = std::array<int, 4>;  // from.frame, from.instance, to.frame, to.instance
using WeightMap = std::map<EdgeKey, std::uint32_t>;

// Instances of `frame` whose mask holds the observation. The pixel is
// floor(x, y); coordinates up to one pixel outside the raster are clamped.
// Returns false when the observation is further out than that.
bool instances_at(const FrameDetections& frame, double x, double y, std::vector<int>& out) {
    out.clear();
    const int w = frame.dims.width;
    const int h = frame.dims.height;
    if (!(x >= -1.0 && x < w + 1.0 && y >= -1.0 && y < h + 1.0)) return false;
    const int px = std::clamp(int(std::floor(x)), 0, w - 1);
    const int py = std::clamp(int(std::floor(y)), 0, h - 1);
    for (std::size_t j = 0; j < frame.instances.size(); ++j) {
        if (frame.instances[j].test(px, py)) out.push_back(int(j));
    }
    return true;
}

void accumulate(std::span<const FrameHit> hits, std::span<const FrameDetections> frames,
                const std::optional<int>& window, WeightMap& weights) {
    std::vector<NodeId> nodes;
    std::vector<int> found;
    std::size_t i = 0;
    while (i < hits.size()) {
        std::size_t end = i;
        nodes.clear();
        while (end < hits.size() && hits[end].point_id == hits[i].point_id) {
            const auto& hit = hits[end];
            instances_at(frames[hit.frame], hit.x, hit.y, found);
            for (const int j : found) nodes.push_back({hit.frame, j});
            ++end;
        }
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        for (std::size_t a = 0; a < nodes.size(); ++a) {
            for (std::size_t b = a + 1; b < nodes.size(); ++b) {
                const int gap = nodes[b].frame - nodes[a].frame;
                if (gap <= 0) continue;
                if (window && gap > *window) break;
                ++weights[{nodes[a].frame, nodes[a].instance, nodes[b].frame, nodes[b].instance}];
            }
        }
        i = end;
    }
}

std::vector<NodeId> all_nodes(std::span<const FrameDetections> frames) {
    std::vector<NodeId> nodes;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t j = 0; j < frames[i].instances.size(); ++j) nodes.push_back({int(i), int(j)});
    }
    return nodes;
}

}  // namespace

TrackGraph build_graph(std::span<const FrameDetections> frames, const ObservationMap& observations,
                       const std::map<std::string, int>& frame_to_image, const GraphOptions& options) {
    if (options.window && *options.window < 1) throw ValidationError("frame window must be at least 1");
    std::vector<FrameHit> hits;
    std::vector<std::string> unresolved;
    std::size_t total = 0;
    std::size_t outside = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (f.frame_index != int(i)) {
            throw ValidationError(fmt::format("frame '{}' has index {}, expected {}", f.frame_name, f.frame_index, i));
        }
        for (const auto& m : f.instances) {
            if (m.dims() != f.dims) {
                throw ValidationError(fmt::format("frame '{}': mask raster differs from frame raster", f.frame_name));
            }
        }
        const auto it = frame_to_image.find(f.frame_name);
        if (it == frame_to_image.end()) {
            unresolved.push_back(f.frame_name);
            continue;
        }
        const auto obs = observations.find(it->second);
        if (obs == observations.end() || f.dims.width <= 0 || f.dims.height <= 0) continue;
        for (const auto& o : obs->second) {
            ++total;
            const double w = f.dims.width;
            const double h = f.dims.height;
            if (!(o.x >= -1.0 && o.x < w + 1.0 && o.y >= -1.0 && o.y < h + 1.0)) {
                ++outside;
                continue;
            }
            hits.push_back({o.point_id, int(i), o.x, o.y});
        }
    }
    if (!unresolved.empty()) {
        throw ValidationError(fmt::format("frames without an SfM image: {}", fmt::join(unresolved, ", ")));
    }
    if (total > 0 && double(outside) > options.max_out_of_raster_fraction * double(total)) {
        throw ValidationError(fmt::format(
            "{} of {} observations fall outside the frame raster; detections and SfM model resolutions differ?",
            outside, total));
    }
    std::stable_sort(hits.begin(), hits.end(), [](const FrameHit& a, const FrameHit& b) {
        return a.point_id < b.point_id;
    });

    // Partition whole points across workers; integer sums merge in any order.
    const unsigned workers = std::max(1u, options.threads);
    std::vector<std::size_t> cuts{0};
    for (unsigned k = 1; k < workers; ++k) {
        std::size_t c = hits.size() * k / workers;
        while (c > 0 && c < hits.size() && hits[c].point_id == hits[c - 1].point_id) ++c;
        cuts.push_back(std::max(c, cuts.back()));
    }
    cuts.push_back(hits.size());
    std::vector<WeightMap> partial(workers);
    if (workers == 1) {
        accumulate(hits, frames, options.window, partial[0]);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < workers; ++k) {
            pool.emplace_back([&, k] {
                accumulate(std::span(hits).subspan(cuts[k], cuts[k + 1] - cuts[k]), frames, options.window, partial[k]);
            });
        }
    }
    WeightMap weights = std::move(partial[0]);
    for (unsigned k = 1; k < workers; ++k) {
        for (const auto& [key, w] : partial[k]) weights[key] += w;
    }

    TrackGraph g;
    g.nodes = all_nodes(frames);
    g.edges.reserve(weights.size());
    for (const auto& [k, w] : weights) g.edges.push_back({{k[0], k[1]}, {k[2], k[3]}, w});
    return g;
}

TrackGraph filter_edges(const TrackGraph& graph) {
    std::vector<GraphEdge> order = graph.edges;
    std::sort(order.begin(), order.end(), [](const GraphEdge& a, const GraphEdge& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        if (a.gap() != b.gap()) return a.gap() < b.gap();
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });
    std::map<NodeId, bool> out_taken;
    std::map<NodeId, bool> in_taken;
    TrackGraph kept{graph.nodes, {}};
    for (const auto& e : order) {
        if (out_taken[e.from] || in_taken[e.to]) continue;
        out_taken[e.from] = true;
        in_taken[e.to] = true;
        kept.edges.push_back(e);
    }
    std::sort(kept.edges.begin(), kept.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return std::tie(a.from, a.to) < std::tie(b.from, b.to);
    });
    return kept;
}

TrackSet extract_tracks(const TrackGraph& filtered, int min_edges) {
    if (min_edges < 0) throw ContractError("min_edges must be non-negative");
    std::map<NodeId, NodeId> next;
    std::map<NodeId, bool> has_in;
    for (const auto& e : filtered.edges) {
        if (!next.emplace(e.from, e.to).second) {
            throw ContractError(fmt::format("node ({}, {}) has more than one outgoing edge", e.from.frame, e.from.instance));
        }
        if (has_in[e.to]) {
            throw ContractError(fmt::format("node ({}, {}) has more than one incoming edge", e.to.frame, e.to.instance));
        }
        has_in[e.to] = true;
    }
    std::vector<NodeId> nodes = filtered.nodes;
    std::sort(nodes.begin(), nodes.end());

    TrackSet out;
    out.min_edges = min_edges;
    std::map<NodeId, bool> visited;
    for (const auto& start : nodes) {
        if (visited[start] || has_in[start]) continue;
        std::vector<NodeId> path{start};
        visited[start] = true;
        for (auto it = next.find(start); it != next.end(); it = next.find(it->second)) {
            path.push_back(it->second);
            visited[it->second] = true;
        }
        if (int(path.size()) - 1 >= min_edges) out.tracks.push_back(std::move(path));
    }
    return out;
}

TrackAnnotation count_and_annotate(const TrackSet& tracks, std::span<const FrameDetections> frames) {
    TrackAnnotation a;
    a.count = tracks.tracks.size();
    a.labels.resize(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) a.labels[i].assign(frames[i].instances.size(), std::nullopt);
    for (std::size_t t = 0; t < tracks.tracks.size(); ++t) {
        for (const auto& n : tracks.tracks[t]) {
            if (n.frame < 0 || std::size_t(n.frame) >= frames.size() || n.instance < 0 ||
                std::size_t(n.instance) >= frames[n.frame].instances.size()) {
                throw ContractError(fmt::format("track {} references unknown node ({}, {})", t, n.frame, n.instance));
            }
            a.labels[n.frame][n.instance] = int(t);
        }
    }
    return a;
}

std::optional<ProjectionMode> parse_projection_mode(std::string_view name) {
    if (name == "observed") return ProjectionMode::observed;
    if (name == "reprojected") return ProjectionMode::reprojected;
    return std::nullopt;
}

std::map<std::string, int> match_frames_to_images(std::span<const FrameDetections> frames, const SparseModel& model) {
    std::map<std::string, int> by_stem;
    std::map<std::string, bool> ambiguous;
    for (const auto& [id, img] : model.images) {
        const std::string s(detail::stem(img.name));
        if (!by_stem.emplace(s, id).second) ambiguous[s] = true;
    }
    std::map<std::string, int> out;
    std::vector<std::string> missing;
    for (const auto& f : frames) {
        const std::string s(detail::stem(f.frame_name));
        const auto it = by_stem.find(s);
        if (it == by_stem.end() || ambiguous.contains(s)) {
            missing.push_back(f.frame_name);
            continue;
        }
        out[f.frame_name] = it->second;
    }
    if (!missing.empty()) {
        throw ValidationError(fmt::format("detections frames not matched to SfM images: {}", fmt::join(missing, ", ")));
    }
    return out;
}

TrackingResult run_tracking(const SparseModel& model, std::span<const FrameDetections> frames,
                            const TrackingOptions& options) {
    // Confidence filter, remembering each kept instance's input position.
    std::vector<FrameDetections> kept;
    std::vector<std::vector<int>> source;
    kept.reserve(frames.size());
    for (const auto& f : frames) {
        FrameDetections k{f.frame_index, f.frame_name, f.dims, {}};
        std::vector<int> src;
        for (std::size_t j = 0; j < f.instances.size(); ++j) {
            if (options.confidence_threshold && f.instances[j].confidence() < *options.confidence_threshold) continue;
            k.instances.push_back(f.instances[j]);
            src.push_back(int(j));
        }
        kept.push_back(std::move(k));
        source.push_back(std::move(src));
    }

    const auto frame_map = match_frames_to_images(frames, model);
    const ObservationMap obs = options.projection == ProjectionMode::observed ? observations_by_image(model)
                                                                              : observations_reprojected(model);
    TrackingResult r;
    r.graph = build_graph(kept, obs, frame_map, options.graph);
    r.filtered = filter_edges(r.graph);
    r.tracks = extract_tracks(r.filtered, options.min_edges);
    for (auto& track : r.tracks.tracks) {
        for (auto& n : track) n.instance = source[n.frame][n.instance];
    }
    r.annotation = count_and_annotate(r.tracks, frames);
    return r;
}

std::string tracks_to_json(const TrackSet& tracks, std::span<const FrameDetections> frames) {
    nlohmann::ordered_json j;
    j["count"] = tracks.tracks.size();
    j["min_edges"] = tracks.min_edges;
    j["tracks"] = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < tracks.tracks.size(); ++t) {
        nlohmann::ordered_json tr;
        tr["track_id"] = t;
        tr["nodes"] = nlohmann::ordered_json::array();
        for (const auto& n : tracks.tracks[t]) {
            nlohmann::ordered_json node;
            node["frame_name"] = frames[n.frame].frame_name;
            node["instance_index"] = n.instance;
            tr["nodes"].push_back(std::move(node));
        }
        j["tracks"].push_back(std::move(tr));
    }
    return j.dump(2) + "\n";
}

std::string labels_to_csv(const TrackAnnotation& annotation, std::span<const FrameDetections> frames) {
    std::string out = "frame_name,instance_index,track_id\n";
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t j = 0; j < annotation.labels[i].size(); ++j) {
            const auto& l = annotation.labels[i][j];
            out += fmt::format("{},{},{}\n", frames[i].frame_name, j, l ? std::to_string(*l) : std::string());
        }
    }
    return out;
}

}  // namespace grapetrack
