#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grapetrack/boxes.hpp"
#include "grapetrack/mask.hpp"

namespace grapetrack {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision, recall and their harmonic mean. With no predictions and no
/// ground truth all three are 1; a single zero denominator makes that
/// metric 0.
PRF prf1(const ConfusionCounts& c);

/// Harmonic mean of a precision/recall pair; 0 when both are 0.
double f1_score(double precision, double recall);

double iou(const PixelBox& a, const PixelBox& b);
/// Throws ValidationError when the rasters differ in size.
double iou(const InstanceMask& a, const InstanceMask& b);

/// Pixel-level counts between two 0/1 rasters of equal size.
ConfusionCounts confusion_semantic(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);
ConfusionCounts confusion_semantic(std::span<const InstanceMask> pred, std::span<const InstanceMask> gt,
                                   ImageDims dims);

/// Row-major pred x gt IoU table.
struct IouMatrix {
    std::size_t n_pred = 0;
    std::size_t n_gt = 0;
    std::vector<double> values;

    double at(std::size_t pred, std::size_t gt) const { return values[pred * n_gt + gt]; }
};

IouMatrix iou_matrix(std::span<const PixelBox> preds, std::span<const PixelBox> gts);
IouMatrix iou_matrix(std::span<const InstanceMask> preds, std::span<const InstanceMask> gts);

struct ScoredBox {
    PixelBox box;
    double confidence = 1.0;
};

struct Match {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<Match> matches;       // in processing order
    std::vector<bool> pred_matched;   // indexed by input position
    ConfusionCounts counts;
};

/// Greedy one-to-one matching. Predictions are visited by descending
/// confidence (ties: lower index first); each takes the still-unmatched
/// ground truth with the largest IoU >= threshold (ties: lower gt index).
MatchResult match_instances(const IouMatrix& ious, std::span<const double> confidences, double iou_threshold);
MatchResult match_instances(std::span<const ScoredBox> preds, std::span<const PixelBox> gts, double iou_threshold);
MatchResult match_instances(std::span<const InstanceMask> preds, std::span<const InstanceMask> gts,
                            double iou_threshold);

struct RankedPrediction {
    double confidence = 0.0;
    bool true_positive = false;
};

struct ApResult {
    double value = 0.0;
    /// Set when there was neither ground truth nor a prediction (value 1).
    bool empty_convention = false;
};

/// 11-point interpolated AP: the mean over r in {0, 0.1, ..., 1} of the
/// best precision reached at recall >= r. The ranking is ordered by
/// descending confidence; equal confidences keep their given order.
ApResult average_precision_11pt(std::span<const RankedPrediction> ranking, std::size_t n_gt);

/// Single-image AP using match_instances for the hit/miss decisions.
ApResult average_precision(std::span<const ScoredBox> preds, std::span<const PixelBox> gts, double iou_threshold);
ApResult average_precision(std::span<const InstanceMask> preds, std::span<const InstanceMask> gts,
                           double iou_threshold);

enum class Task { semantic, boxes, instances };

std::string_view to_string(Task task);
std::optional<Task> parse_task(std::string_view name);

/// Ground truth or predictions for one image. Ground truth confidences are
/// 1. `masks`, when present, pairs index-by-index with `boxes`.
struct ImageSample {
    std::string image_id;
    ImageDims dims;
    std::vector<ScoredBox> boxes;
    std::optional<std::vector<InstanceMask>> masks;
};

struct EvalOptions {
    Task task = Task::instances;
    std::vector<double> iou_thresholds{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    /// Predictions below this confidence are dropped before the P/R/F1
    /// matching. AP always uses the full ranking.
    double confidence_threshold = 0.9;
};

struct EvalRow {
    std::optional<double> iou;  // empty for the semantic task
    std::optional<double> ap;   // empty for the semantic task
    bool ap_empty_convention = false;
    PRF prf;
    ConfusionCounts counts;
};

struct PerImageRow {
    std::string image_id;
    std::optional<double> iou;
    ConfusionCounts counts;
    PRF prf;
};

/// Rows are computed from counts accumulated over all images; the per-image
/// rows are the breakdown (their mean is not the reported value).
struct EvalReport {
    Task task = Task::instances;
    double confidence_threshold = 0.9;
    std::vector<EvalRow> rows;
    std::vector<PerImageRow> per_image;
    std::vector<std::string> warnings;
};

/// Evaluates predictions against ground truth for one task. A ground-truth
/// image without predictions counts as zero predictions (with a warning).
/// Mask tasks only use ground-truth images that carry masks.
EvalReport evaluate_dataset(std::span<const ImageSample> preds, std::span<const ImageSample> gts,
                            const EvalOptions& options);

/// JSON: {task, ap_variant, aggregation, confidence_threshold, rows[...],
/// per_image[...], warnings[...]}, numbers with six decimals.
std::string report_to_json(const EvalReport& report);
/// CSV header: iou,ap,precision,recall,f1,tp,fp,fn
std::string report_to_csv(const EvalReport& report);

}  // namespace grapetrack
