#pragma once

// Deliberately plain reference implementations. They share no code with the
// library and favor obviousness over speed.

#include <cstdint>
#include <random>
#include <vector>

#include "grapetrack/mask.hpp"
#include "grapetrack/metrics.hpp"

namespace testing {

inline double naive_mask_iou(const grapetrack::InstanceMask& a, const grapetrack::InstanceMask& b) {
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const bool p = a.test(x, y), q = b.test(x, y);
            if (p && q) ++inter;
            if (p || q) ++uni;
        }
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

struct NaiveMatch {
    std::vector<int> gt_of_pred;  // -1 when unmatched
    grapetrack::ConfusionCounts counts;
};

/// Visits predictions by repeatedly picking the highest remaining confidence
/// (first one wins a tie), then scans the ground truth left to right keeping
/// a strictly better IoU.
inline NaiveMatch naive_match(const std::vector<std::vector<double>>& iou, const std::vector<double>& conf,
                              double threshold, std::size_t n_gt) {
    const std::size_t n = conf.size();
    NaiveMatch out;
    out.gt_of_pred.assign(n, -1);
    std::vector<bool> visited(n, false), taken(n_gt, false);
    for (std::size_t step = 0; step < n; ++step) {
        int best = -1;
        for (std::size_t p = 0; p < n; ++p) {
            if (!visited[p] && (best < 0 || conf[p] > conf[std::size_t(best)])) best = int(p);
        }
        visited[std::size_t(best)] = true;
        int g_best = -1;
        double v_best = -1.0;
        for (std::size_t g = 0; g < n_gt; ++g) {
            const double v = iou[std::size_t(best)][g];
            if (!taken[g] && v >= threshold && v > v_best) {
                g_best = int(g);
                v_best = v;
            }
        }
        if (g_best >= 0) {
            taken[std::size_t(g_best)] = true;
            out.gt_of_pred[std::size_t(best)] = g_best;
        }
    }
    for (int g : out.gt_of_pred) (g >= 0 ? out.counts.tp : out.counts.fp) += 1;
    for (bool t : taken) out.counts.fn += t ? 0 : 1;
    return out;
}

inline grapetrack::ConfusionCounts naive_semantic(const std::vector<grapetrack::InstanceMask>& pred,
                                                  const std::vector<grapetrack::InstanceMask>& gt, int w, int h) {
    grapetrack::ConfusionCounts c;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool p = false, g = false;
            for (const auto& m : pred) p = p || m.test(x, y);
            for (const auto& m : gt) g = g || m.test(x, y);
            if (p && g) ++c.tp;
            if (p && !g) ++c.fp;
            if (!p && g) ++c.fn;
        }
    }
    return c;
}

/// Blob-like random masks: a random rectangle, sometimes with holes, so
/// fixtures contain a useful spread of IoU values.
inline grapetrack::InstanceMask random_blob(std::mt19937_64& rng, int w, int h) {
    std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
    std::bernoulli_distribution hole(0.15);
    int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    std::vector<std::uint8_t> bits(std::size_t(w) * h, 0);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) bits[std::size_t(y) * w + x] = hole(rng) ? 0 : 1;
    }
    bits[std::size_t(y0) * w + x0] = 1;
    return {w, h, std::move(bits)};
}

}  // namespace testing
