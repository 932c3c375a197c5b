#include "grapetrack/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "grapetrack/error.hpp"

namespace grapetrack {

PRF prf1(const ConfusionCounts& c) {
    const std::uint64_t pd = c.tp + c.fp;
    const std::uint64_t rd = c.tp + c.fn;
    if (pd == 0 && rd == 0) return {1.0, 1.0, 1.0};
    PRF out;
    out.precision = pd == 0 ? 0.0 : double(c.tp) / double(pd);
    out.recall = rd == 0 ? 0.0 : double(c.tp) / double(rd);
    out.f1 = f1_score(out.precision, out.recall);
    return out;
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

double iou(const PixelBox& a, const PixelBox& b) {
    const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double iou(const InstanceMask& a, const InstanceMask& b) {
    if (a.dims() != b.dims()) {
        throw ValidationError(fmt::format("IoU of masks with different rasters ({}x{} vs {}x{})", a.width(),
                                          a.height(), b.width(), b.height()));
    }
    const PixelRect overlap = intersect(a.tight_box(), b.tight_box());
    std::size_t inter = 0;
    if (!overlap.empty()) {
        const auto ab = a.bits();
        const auto bb = b.bits();
        for (int y = overlap.y0; y < overlap.y1; ++y) {
            const std::size_t row = std::size_t(y) * a.width();
            for (int x = overlap.x0; x < overlap.x1; ++x) inter += ab[row + x] & bb[row + x];
        }
    }
    const std::size_t uni = a.popcount() + b.popcount() - inter;
    return double(inter) / double(uni);
}

ConfusionCounts confusion_semantic(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
    if (pred.size() != gt.size()) {
        throw ValidationError(fmt::format("semantic rasters differ in size ({} vs {})", pred.size(), gt.size()));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        c.tp += p && g;
        c.fp += p && !g;
        c.fn += !p && g;
    }
    return c;
}

ConfusionCounts confusion_semantic(std::span<const InstanceMask> pred, std::span<const InstanceMask> gt,
                                   ImageDims dims) {
    const auto p = union_bits(pred, dims);
    const auto g = union_bits(gt, dims);
    return confusion_semantic(p, g);
}

IouMatrix iou_matrix(std::span<const PixelBox> preds, std::span<const PixelBox> gts) {
    IouMatrix m{preds.size(), gts.size(), std::vector<double>(preds.size() * gts.size())};
    for (std::size_t p = 0; p < preds.size(); ++p) {
        for (std::size_t g = 0; g < gts.size(); ++g) m.values[p * gts.size() + g] = iou(preds[p], gts[g]);
    }
    return m;
}

IouMatrix iou_matrix(std::span<const InstanceMask> preds, std::span<const InstanceMask> gts) {
    IouMatrix m{preds.size(), gts.size(), std::vector<double>(preds.size() * gts.size())};
    for (std::size_t p = 0; p < preds.size(); ++p) {
        for (std::size_t g = 0; g < gts.size(); ++g) m.values[p * gts.size() + g] = iou(preds[p], gts[g]);
    }
    return m;
}

namespace {

std::vector<std::size_t> confidence_order(std::span<const double> confidences) {
    std::vector<std::size_t> order(confidences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
    return order;
}

std::vector<PixelBox> boxes_of(std::span<const ScoredBox> s) {
    std::vector<PixelBox> out;
    out.reserve(s.size());
    for (const auto& b : s) out.push_back(b.box);
    return out;
}

std::vector<double> confidences_of(std::span<const ScoredBox> s) {
    std::vector<double> out;
    for (const auto& b : s) out.push_back(b.confidence);
    return out;
}

std::vector<double> confidences_of(std::span<const InstanceMask> s) {
    std::vector<double> out;
    for (const auto& m : s) out.push_back(m.confidence());
    return out;
}

}  // namespace

MatchResult match_instances(const IouMatrix& ious, std::span<const double> confidences, double iou_threshold) {
    if (confidences.size() != ious.n_pred) throw ContractError("confidence count differs from prediction count");
    MatchResult r;
    r.pred_matched.assign(ious.n_pred, false);
    std::vector<bool> gt_taken(ious.n_gt, false);
    for (const std::size_t p : confidence_order(confidences)) {
        std::size_t best = ious.n_gt;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < ious.n_gt; ++g) {
            const double v = ious.at(p, g);
            if (gt_taken[g] || v < iou_threshold) continue;
            if (v > best_iou) {
                best = g;
                best_iou = v;
            }
        }
        if (best == ious.n_gt) continue;
        gt_taken[best] = true;
        r.pred_matched[p] = true;
        r.matches.push_back({p, best, best_iou});
    }
    r.counts.tp = r.matches.size();
    r.counts.fp = ious.n_pred - r.matches.size();
    r.counts.fn = ious.n_gt - r.matches.size();
    return r;
}

MatchResult match_instances(std::span<const ScoredBox> preds, std::span<const PixelBox> gts, double iou_threshold) {
    const auto boxes = boxes_of(preds);
    return match_instances(iou_matrix(boxes, gts), confidences_of(preds), iou_threshold);
}

MatchResult match_instances(std::span<const InstanceMask> preds, std::span<const InstanceMask> gts,
                            double iou_threshold) {
    return match_instances(iou_matrix(preds, gts), confidences_of(preds), iou_threshold);
}

ApResult average_precision_11pt(std::span<const RankedPrediction> ranking, std::size_t n_gt) {
    if (n_gt == 0) return ranking.empty() ? ApResult{1.0, true} : ApResult{0.0, false};
    std::vector<std::size_t> order(ranking.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ranking[a].confidence > ranking[b].confidence; });

    std::vector<double> precision;
    std::vector<double> recall;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        tp += ranking[order[k]].true_positive ? 1 : 0;
        precision.push_back(double(tp) / double(k + 1));
        recall.push_back(double(tp) / double(n_gt));
    }
    double sum = 0.0;
    for (int level = 0; level <= 10; ++level) {
        const double r = level / 10.0;
        double best = 0.0;
        for (std::size_t k = 0; k < precision.size(); ++k) {
            if (recall[k] >= r) best = std::max(best, precision[k]);
        }
        sum += best;
    }
    return {sum / 11.0, false};
}

namespace {

std::vector<RankedPrediction> ranked(const MatchResult& m, std::span<const double> confidences) {
    std::vector<RankedPrediction> out;
    for (std::size_t p = 0; p < confidences.size(); ++p) out.push_back({confidences[p], bool(m.pred_matched[p])});
    return out;
}

}  // namespace

ApResult average_precision(std::span<const ScoredBox> preds, std::span<const PixelBox> gts, double iou_threshold) {
    const auto conf = confidences_of(preds);
    const auto m = match_instances(preds, gts, iou_threshold);
    return average_precision_11pt(ranked(m, conf), gts.size());
}

ApResult average_precision(std::span<const InstanceMask> preds, std::span<const InstanceMask> gts,
                           double iou_threshold) {
    const auto conf = confidences_of(preds);
    const auto m = match_instances(preds, gts, iou_threshold);
    return average_precision_11pt(ranked(m, conf), gts.size());
}

std::string_view to_string(Task task) {
    switch (task) {
        case Task::semantic: return "semantic";
        case Task::boxes: return "boxes";
        case Task::instances: return "instances";
    }
    return "instances";
}

std::optional<Task> parse_task(std::string_view name) {
    if (name == "semantic") return Task::semantic;
    if (name == "boxes") return Task::boxes;
    if (name == "instances") return Task::instances;
    return std::nullopt;
}

namespace {

// IoUs and confidences for one image, computed once for all thresholds.
struct ImagePairing {
    std::string image_id;
    IouMatrix ious;
    std::vector<double> confidences;
};

ImagePairing pair_image(const ImageSample* pred, const ImageSample& gt, Task task) {
    ImagePairing out{gt.image_id, {}, {}};
    if (task == Task::boxes) {
        std::vector<PixelBox> gboxes;
        for (const auto& b : gt.boxes) gboxes.push_back(b.box);
        const std::vector<ScoredBox> none;
        const auto& pboxes = pred ? pred->boxes : none;
        out.ious = iou_matrix(boxes_of(pboxes), gboxes);
        out.confidences = confidences_of(pboxes);
    } else {
        const std::vector<InstanceMask> none;
        if (pred && !pred->masks) {
            throw ValidationError(fmt::format("predictions for '{}' carry no masks", gt.image_id));
        }
        const auto& pmasks = pred ? *pred->masks : none;
        out.ious = iou_matrix(pmasks, *gt.masks);
        out.confidences = confidences_of(pmasks);
    }
    return out;
}

// Keeps predictions at or above the confidence threshold.
ImagePairing filter_confident(const ImagePairing& in, double threshold) {
    std::vector<std::size_t> keep;
    for (std::size_t p = 0; p < in.confidences.size(); ++p) {
        if (in.confidences[p] >= threshold) keep.push_back(p);
    }
    ImagePairing out{in.image_id, {keep.size(), in.ious.n_gt, {}}, {}};
    for (const auto p : keep) {
        out.confidences.push_back(in.confidences[p]);
        for (std::size_t g = 0; g < in.ious.n_gt; ++g) out.ious.values.push_back(in.ious.at(p, g));
    }
    return out;
}

void check_thresholds(const std::vector<double>& t) {
    if (t.empty()) throw ValidationError("at least one IoU threshold is required");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] > 0.0 && t[i] <= 1.0)) throw ValidationError(fmt::format("IoU threshold {} is not in (0, 1]", t[i]));
        if (i > 0 && !(t[i] > t[i - 1])) throw ValidationError("IoU thresholds must be strictly increasing");
    }
}

}  // namespace

EvalReport evaluate_dataset(std::span<const ImageSample> preds, std::span<const ImageSample> gts,
                            const EvalOptions& options) {
    EvalReport report;
    report.task = options.task;
    report.confidence_threshold = options.confidence_threshold;

    std::map<std::string_view, const ImageSample*> pred_by_id;
    for (const auto& p : preds) {
        if (!pred_by_id.emplace(p.image_id, &p).second) {
            throw ValidationError(fmt::format("duplicate predictions for image '{}'", p.image_id));
        }
    }
    std::map<std::string_view, bool> gt_ids;
    for (const auto& g : gts) gt_ids[g.image_id] = true;
    for (const auto& p : preds) {
        if (!gt_ids.contains(p.image_id)) {
            report.warnings.push_back(fmt::format("predictions for '{}' have no ground truth; ignored", p.image_id));
        }
    }

    const auto lookup = [&](const ImageSample& g) -> const ImageSample* {
        const auto it = pred_by_id.find(g.image_id);
        if (it != pred_by_id.end()) return it->second;
        report.warnings.push_back(fmt::format("no predictions for '{}'; counted as zero predictions", g.image_id));
        return nullptr;
    };

    if (options.task == Task::semantic) {
        ConfusionCounts total;
        for (const auto& g : gts) {
            if (!g.masks) continue;
            const ImageSample* p = lookup(g);
            std::vector<InstanceMask> kept;
            if (p) {
                if (!p->masks) throw ValidationError(fmt::format("predictions for '{}' carry no masks", g.image_id));
                for (const auto& m : *p->masks) {
                    if (m.confidence() >= options.confidence_threshold) kept.push_back(m);
                }
            }
            const auto c = confusion_semantic(kept, *g.masks, g.dims);
            total += c;
            report.per_image.push_back({g.image_id, std::nullopt, c, prf1(c)});
        }
        report.rows.push_back({std::nullopt, std::nullopt, false, prf1(total), total});
        return report;
    }

    check_thresholds(options.iou_thresholds);
    std::vector<ImagePairing> all;
    std::size_t n_gt = 0;
    for (const auto& g : gts) {
        if (options.task == Task::instances && !g.masks) continue;
        all.push_back(pair_image(lookup(g), g, options.task));
        n_gt += all.back().ious.n_gt;
    }
    std::vector<ImagePairing> confident;
    for (const auto& a : all) confident.push_back(filter_confident(a, options.confidence_threshold));

    for (const double thr : options.iou_thresholds) {
        EvalRow row;
        row.iou = thr;
        std::vector<RankedPrediction> ranking;
        for (const auto& a : all) {
            const auto m = match_instances(a.ious, a.confidences, thr);
            for (std::size_t p = 0; p < a.confidences.size(); ++p) {
                ranking.push_back({a.confidences[p], bool(m.pred_matched[p])});
            }
        }
        const auto ap = average_precision_11pt(ranking, n_gt);
        row.ap = ap.value;
        row.ap_empty_convention = ap.empty_convention;
        for (const auto& c : confident) {
            const auto m = match_instances(c.ious, c.confidences, thr);
            row.counts += m.counts;
            report.per_image.push_back({c.image_id, thr, m.counts, prf1(m.counts)});
        }
        row.prf = prf1(row.counts);
        report.rows.push_back(row);
    }
    return report;
}

namespace {

std::string num(double v) { return fmt::format("{:.6f}", v); }

std::string opt_json(const std::optional<double>& v) { return v ? num(*v) : "null"; }

std::string opt_csv(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string row_fields_json(const std::optional<double>& iou_v, const std::optional<double>& ap, const PRF& prf,
                            const ConfusionCounts& c) {
    return fmt::format(R"("iou": {}, "ap": {}, "precision": {}, "recall": {}, "f1": {}, "tp": {}, "fp": {}, "fn": {})",
                       opt_json(iou_v), opt_json(ap), num(prf.precision), num(prf.recall), num(prf.f1), c.tp, c.fp,
                       c.fn);
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    std::string out = "{\n";
    out += fmt::format("  \"task\": \"{}\",\n", to_string(report.task));
    out += "  \"ap_variant\": \"voc11\",\n";
    out += "  \"aggregation\": \"accumulated\",\n";
    out += fmt::format("  \"confidence_threshold\": {},\n", num(report.confidence_threshold));
    out += "  \"rows\": [";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& r = report.rows[i];
        out += fmt::format("{}\n    {{{}}}", i ? "," : "", row_fields_json(r.iou, r.ap, r.prf, r.counts));
    }
    out += report.rows.empty() ? "],\n" : "\n  ],\n";
    out += "  \"per_image\": [";
    for (std::size_t i = 0; i < report.per_image.size(); ++i) {
        const auto& r = report.per_image[i];
        out += fmt::format("{}\n    {{\"image_id\": {}, {}}}", i ? "," : "", nlohmann::json(r.image_id).dump(),
                           row_fields_json(r.iou, std::nullopt, r.prf, r.counts));
    }
    out += report.per_image.empty() ? "],\n" : "\n  ],\n";
    out += "  \"warnings\": [";
    for (std::size_t i = 0; i < report.warnings.size(); ++i) {
        out += fmt::format("{}\n    {}", i ? "," : "", nlohmann::json(report.warnings[i]).dump());
    }
    out += report.warnings.empty() ? "]\n" : "\n  ]\n";
    out += "}\n";
    return out;
}

std::string report_to_csv(const EvalReport& report) {
    std::string out = "iou,ap,precision,recall,f1,tp,fp,fn\n";
    for (const auto& r : report.rows) {
        out += fmt::format("{},{},{},{},{},{},{},{}\n", opt_csv(r.iou), opt_csv(r.ap), num(r.prf.precision),
                           num(r.prf.recall), num(r.prf.f1), r.counts.tp, r.counts.fp, r.counts.fn);
    }
    return out;
}

}  // namespace grapetrack
