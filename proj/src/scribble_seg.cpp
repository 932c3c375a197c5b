#include "grapetrack/scribble_seg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "grapetrack/error.hpp"

namespace grapetrack {

namespace {

constexpr int kUnlabeled = 0;

// 4-neighbors of pixel p in a w x h raster, written to `out`; returns count.
int neighbors4(std::size_t p, int w, int h, std::size_t out[4]) {
    const int x = int(p % std::size_t(w));
    const int y = int(p / std::size_t(w));
    int n = 0;
    if (x > 0) out[n++] = p - 1;
    if (x + 1 < w) out[n++] = p + 1;
    if (y > 0) out[n++] = p - std::size_t(w);
    if (y + 1 < h) out[n++] = p + std::size_t(w);
    return n;
}

// Reconstruction by erosion of (g + h) over g: the h-minima transform.
// Computed as a min-max path propagation from every pixel.
std::vector<double> fill_shallow_minima(const std::vector<double>& g, int w, int h, double depth) {
    std::vector<double> r(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) r[p] = g[p] + depth;
    if (depth <= 0.0) return r;
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::size_t p = 0; p < r.size(); ++p) queue.push({r[p], p});
    std::size_t nb[4];
    while (!queue.empty()) {
        const auto [v, p] = queue.top();
        queue.pop();
        if (v > r[p]) continue;
        const int n = neighbors4(p, w, h, nb);
        for (int k = 0; k < n; ++k) {
            const double cand = std::max(v, g[nb[k]]);
            if (cand < r[nb[k]]) {
                r[nb[k]] = cand;
                queue.push({cand, nb[k]});
            }
        }
    }
    return r;
}

// Labels 4-connected plateaus with no lower neighbor as 1..M in raster order.
std::vector<int> regional_minima(const std::vector<double>& f, int w, int h, int& count) {
    std::vector<int> comp(f.size(), 0);
    std::vector<int> labels(f.size(), kUnlabeled);
    std::vector<std::size_t> stack;
    std::vector<std::size_t> members;
    std::size_t nb[4];
    count = 0;
    int next_comp = 0;
    for (std::size_t seed = 0; seed < f.size(); ++seed) {
        if (comp[seed] != 0) continue;
        ++next_comp;
        bool is_min = true;
        members.clear();
        stack.assign(1, seed);
        comp[seed] = next_comp;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            members.push_back(p);
            const int n = neighbors4(p, w, h, nb);
            for (int k = 0; k < n; ++k) {
                const std::size_t q = nb[k];
                if (f[q] < f[p]) is_min = false;
                if (f[q] == f[p] && comp[q] == 0) {
                    comp[q] = next_comp;
                    stack.push_back(q);
                }
            }
        }
        if (!is_min) continue;
        ++count;
        for (const auto p : members) labels[p] = count;
    }
    return labels;
}

}  // namespace

RegionMap watershed_oversegment(const GrayImage& crop, double h_min) {
    const int w = crop.width;
    const int h = crop.height;
    if (w <= 0 || h <= 0 || crop.values.size() != std::size_t(w) * h) {
        throw ValidationError("watershed needs a non-empty crop");
    }
    if (!(h_min >= 0.0)) throw ValidationError("h_min must be non-negative");
    const GrayImage gradient = morphological_gradient(crop);
    const auto relief = fill_shallow_minima(gradient.values, w, h, h_min);
    int n_markers = 0;
    std::vector<int> labels = regional_minima(relief, w, h, n_markers);

    // Seeded priority flood. A pixel may be queued once per neighboring
    // basin; the first entry popped claims it. Within one relief level the
    // basin whose marker mean luminance is closest wins, so a plateau shared
    // by two basins (the two-pixel gradient band of a step edge) splits
    // along the tone boundary instead of by arrival order. Every pixel is
    // claimed from a labeled neighbor, so basins stay 4-connected and there
    // is no ridge label in the output.
    std::vector<double> marker_sum(std::size_t(n_markers) + 1, 0.0);
    std::vector<std::size_t> marker_cnt(std::size_t(n_markers) + 1, 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        marker_sum[labels[p]] += crop.values[p];
        ++marker_cnt[labels[p]];
    }
    const auto tone_distance = [&](std::size_t p, int label) {
        return std::abs(crop.values[p] - marker_sum[label] / double(marker_cnt[label]));
    };

    using Item = std::tuple<double, double, std::uint64_t, std::size_t, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    std::uint64_t tick = 0;
    std::size_t nb[4];
    const auto push_neighbors = [&](std::size_t p, double level) {
        const int n = neighbors4(p, w, h, nb);
        for (int k = 0; k < n; ++k) {
            const std::size_t q = nb[k];
            if (labels[q] != kUnlabeled) continue;
            queue.push({std::max(level, relief[q]), tone_distance(q, labels[p]), tick++, q, labels[p]});
        }
    };
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (labels[p] != kUnlabeled) push_neighbors(p, relief[p]);
    }
    while (!queue.empty()) {
        const auto [level, distance, order, p, label] = queue.top();
        queue.pop();
        if (labels[p] != kUnlabeled) continue;
        labels[p] = label;
        push_neighbors(p, level);
    }

    RegionMap out{w, h, std::vector<int>(labels.size()), 0};
    std::vector<int> remap(std::size_t(n_markers) + 1, -1);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        int& id = remap[labels[p]];
        if (id < 0) id = out.count++;
        out.labels[p] = id;
    }
    return out;
}

RegionGraph build_arg(const RegionMap& regions, const RgbImage& crop) {
    if (crop.width != regions.width || crop.height != regions.height) {
        throw ValidationError("region map and crop differ in size");
    }
    RegionGraph g;
    g.vertices.resize(std::size_t(regions.count));
    g.diagonal = std::sqrt(double(regions.width) * regions.width + double(regions.height) * regions.height);
    std::vector<std::array<double, 5>> acc(std::size_t(regions.count), {0, 0, 0, 0, 0});
    std::set<std::pair<int, int>> adjacent;
    for (int y = 0; y < regions.height; ++y) {
        for (int x = 0; x < regions.width; ++x) {
            const int r = regions.at(x, y);
            const std::uint8_t* c = crop.pixel(x, y);
            auto& a = acc[std::size_t(r)];
            a[0] += c[0];
            a[1] += c[1];
            a[2] += c[2];
            a[3] += x;
            a[4] += y;
            ++g.vertices[std::size_t(r)].pixel_count;
            if (x + 1 < regions.width && regions.at(x + 1, y) != r) {
                adjacent.insert(std::minmax(r, regions.at(x + 1, y)));
            }
            if (y + 1 < regions.height && regions.at(x, y + 1) != r) {
                adjacent.insert(std::minmax(r, regions.at(x, y + 1)));
            }
        }
    }
    for (std::size_t r = 0; r < g.vertices.size(); ++r) {
        auto& v = g.vertices[r];
        const double n = double(v.pixel_count);
        v.mean_color = {acc[r][0] / n, acc[r][1] / n, acc[r][2] / n};
        v.centroid_x = acc[r][3] / n;
        v.centroid_y = acc[r][4] / n;
    }
    for (const auto& [a, b] : adjacent) {
        const auto& va = g.vertices[std::size_t(a)];
        const auto& vb = g.vertices[std::size_t(b)];
        g.edges.push_back({a, b, (vb.centroid_x - va.centroid_x) / g.diagonal,
                           (vb.centroid_y - va.centroid_y) / g.diagonal});
    }
    return g;
}

ScribbleSet parse_scribbles(std::string_view json_text) {
    try {
        const auto j = nlohmann::json::parse(json_text);
        ScribbleSet set;
        for (const auto& s : j.at("strokes")) {
            Stroke stroke;
            const auto label = s.at("label").get<std::string>();
            if (label == "grape") stroke.label = SegLabel::grape;
            else if (label == "background") stroke.label = SegLabel::background;
            else throw ParseError(fmt::format("unknown scribble label '{}'", label));
            for (const auto& px : s.at("pixels")) {
                if (px.size() != 2) throw ParseError("scribble pixels must be [x, y] pairs");
                stroke.pixels.push_back({px[0].get<int>(), px[1].get<int>()});
            }
            set.strokes.push_back(std::move(stroke));
        }
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("scribble file: {}", e.what()));
    }
}

std::vector<SegLabel> propagate_labels(const RegionGraph& arg, const ScribbleSet& scribbles,
                                       const RegionMap& regions, double lambda_spatial) {
    const std::size_t n = arg.vertices.size();
    if (n != std::size_t(regions.count)) throw ValidationError("region graph does not match region map");
    std::vector<std::array<std::size_t, 2>> votes(n, {0, 0});
    for (const auto& stroke : scribbles.strokes) {
        for (const auto& [x, y] : stroke.pixels) {
            if (x < 0 || y < 0 || x >= regions.width || y >= regions.height) {
                throw ValidationError(fmt::format("scribble pixel ({}, {}) is outside the {}x{} crop", x, y,
                                                  regions.width, regions.height));
            }
            ++votes[std::size_t(regions.at(x, y))][stroke.label == SegLabel::grape ? 1 : 0];
        }
    }
    std::vector<SegLabel> labels(n, SegLabel::background);
    std::vector<std::size_t> model;
    bool any_grape = false;
    bool any_background = false;
    for (std::size_t r = 0; r < n; ++r) {
        if (votes[r][0] + votes[r][1] == 0) continue;
        labels[r] = votes[r][1] > votes[r][0] ? SegLabel::grape : SegLabel::background;
        (labels[r] == SegLabel::grape ? any_grape : any_background) = true;
        model.push_back(r);
    }
    if (!any_grape) throw ValidationError("grape scribbles cover no region");
    if (!any_background) throw ValidationError("background scribbles cover no region");

    std::vector<bool> is_model(n, false);
    for (const auto m : model) is_model[m] = true;
    for (std::size_t u = 0; u < n; ++u) {
        if (is_model[u]) continue;
        const auto& vu = arg.vertices[u];
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = model.front();
        for (const auto m : model) {
            const auto& vm = arg.vertices[m];
            const double dr = vu.mean_color[0] - vm.mean_color[0];
            const double dg = vu.mean_color[1] - vm.mean_color[1];
            const double db = vu.mean_color[2] - vm.mean_color[2];
            const double dx = vu.centroid_x - vm.centroid_x;
            const double dy = vu.centroid_y - vm.centroid_y;
            const double cost = std::sqrt(dr * dr + dg * dg + db * db) / 255.0 +
                                lambda_spatial * std::sqrt(dx * dx + dy * dy) / arg.diagonal;
            if (cost < best) {
                best = cost;
                pick = m;
            }
        }
        labels[u] = labels[pick];
    }
    return labels;
}

InstanceMask extract_instance_mask(std::span<const SegLabel> labels, const RegionMap& regions, const PixelRect& bbox) {
    if (labels.size() != std::size_t(regions.count)) throw ContractError("labels do not cover every region");
    std::vector<std::uint8_t> bits(regions.labels.size(), 0);
    bool any = false;
    for (int y = 0; y < regions.height; ++y) {
        for (int x = 0; x < regions.width; ++x) {
            if (!bbox.contains(x, y)) continue;
            if (labels[std::size_t(regions.at(x, y))] == SegLabel::grape) {
                bits[std::size_t(y) * regions.width + x] = 1;
                any = true;
            }
        }
    }
    if (!any) throw ValidationError("segmentation produced no grape pixels inside the box");
    return InstanceMask(regions.width, regions.height, std::move(bits));
}

InstanceMask segment_with_scribbles(const RgbImage& crop, const ScribbleSet& scribbles, const ScribbleOptions& options) {
    const RegionMap regions = watershed_oversegment(luminance(crop), options.h_min);
    const RegionGraph arg = build_arg(regions, crop);
    const auto labels = propagate_labels(arg, scribbles, regions, options.lambda_spatial);
    return extract_instance_mask(labels, regions, options.bbox.value_or(PixelRect{0, 0, crop.width, crop.height}));
}

}  // namespace grapetrack
