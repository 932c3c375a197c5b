#include <doctest.h>

#include <cmath>
#include <random>

#include "grapetrack/error.hpp"
#include "grapetrack/metrics.hpp"
#include "metric_oracles.hpp"
#include "reported_scores.hpp"

using namespace grapetrack;

namespace {

PixelBox box(double x, double y, double w, double h) { return {x, y, w, h}; }

ImageSample box_sample(std::string id, std::vector<ScoredBox> boxes) {
    return {std::move(id), {200, 200}, std::move(boxes), std::nullopt};
}

void check_triples(const std::vector<testing::ReportedTriple>& rows) {
    for (const auto& t : rows) {
        INFO(t.source);
        CHECK(std::abs(f1_score(t.precision, t.recall) - t.f1) <= 0.001);
    }
}

}  // namespace

TEST_CASE("prf1: worked values") {
    CHECK(f1_score(0.938, 0.892) == doctest::Approx(0.915).epsilon(0.001));
    CHECK(f1_score(0.920, 0.860) == doctest::Approx(0.889).epsilon(0.001));
    const auto empty = prf1({0, 0, 0});
    CHECK(empty.precision == 1.0);
    CHECK(empty.recall == 1.0);
    CHECK(empty.f1 == 1.0);
    const auto no_pred = prf1({0, 0, 3});
    CHECK(no_pred.precision == 0.0);
    CHECK(no_pred.recall == 0.0);
    CHECK(no_pred.f1 == 0.0);
    const auto no_gt = prf1({0, 2, 0});
    CHECK(no_gt.precision == 0.0);
    CHECK(no_gt.recall == 0.0);
    const auto c = prf1({3, 1, 2});
    CHECK(c.precision == 0.75);
    CHECK(c.recall == 0.6);
    CHECK(c.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
}

TEST_CASE("prf1: every reported precision/recall pair reproduces its F1 within 0.001") {
    check_triples(testing::kInstanceRows);
    check_triples(testing::kSemanticRows);
    check_triples(testing::kBoxRowsMaskRcnn);
    check_triples(testing::kBoxRowsYolo);
}

TEST_CASE("property: prf1 matches the closed formulas on random counts") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::uint64_t> d(0, 1000);
    for (int i = 0; i < 10000; ++i) {
        const ConfusionCounts c{d(rng), d(rng), d(rng)};
        if (c.tp == 0) continue;
        const auto r = prf1(c);
        const double p = double(c.tp) / double(c.tp + c.fp);
        const double q = double(c.tp) / double(c.tp + c.fn);
        CHECK(std::abs(r.precision - p) <= 1e-12);
        CHECK(std::abs(r.recall - q) <= 1e-12);
        CHECK(std::abs(r.f1 - 2 * p * q / (p + q)) <= 1e-12);
    }
}

TEST_CASE("iou: boxes") {
    CHECK(iou(box(3, 4, 5, 6), box(3, 4, 5, 6)) == 1.0);
    CHECK(iou(box(0, 0, 2, 2), box(1, 0, 2, 2)) == doctest::Approx(2.0 / 6.0));
    CHECK(iou(box(0, 0, 2, 2), box(2, 0, 2, 2)) == 0.0);
    CHECK(iou(box(0, 0, 2, 2), box(5, 5, 2, 2)) == 0.0);
}

TEST_CASE("property: box IoU equals a rasterized overlap count on integer boxes") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pos(0, 20), ext(1, 12);
    for (int i = 0; i < 500; ++i) {
        const PixelBox a = box(pos(rng), pos(rng), ext(rng), ext(rng));
        const PixelBox b = box(pos(rng), pos(rng), ext(rng), ext(rng));
        int inter = 0, uni = 0;
        for (int y = 0; y < 40; ++y) {
            for (int x = 0; x < 40; ++x) {
                const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
                const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
                inter += in_a && in_b;
                uni += in_a || in_b;
            }
        }
        CHECK(iou(a, b) == doctest::Approx(double(inter) / uni).epsilon(1e-12));
    }
}

TEST_CASE("iou: masks") {
    const InstanceMask a(2, 2, {1, 0, 1, 0});  // (0,0) and (0,1)
    const InstanceMask b(2, 2, {0, 0, 1, 1});  // (0,1) and (1,1)
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(a, a) == 1.0);
    CHECK_THROWS_AS(iou(a, InstanceMask(3, 2, {1, 0, 0, 0, 0, 0})), ValidationError);
}

TEST_CASE("confusion_semantic: small cases") {
    const InstanceMask five(4, 2, {1, 1, 1, 1, 1, 0, 0, 0});
    const std::vector<InstanceMask> gt{five};
    CHECK(confusion_semantic(gt, gt, {4, 2}) == ConfusionCounts{5, 0, 0});
    const std::vector<InstanceMask> three{InstanceMask(4, 2, {0, 0, 0, 0, 1, 1, 1, 0})};
    CHECK(confusion_semantic({}, three, {4, 2}) == ConfusionCounts{0, 0, 3});
    const std::vector<std::uint8_t> p{1, 0}, g{1};
    CHECK_THROWS_AS(confusion_semantic(p, g), ValidationError);
}

TEST_CASE("match_instances: worked examples") {
    SUBCASE("identical pair") {
        const std::vector<ScoredBox> preds{{box(0, 0, 10, 10), 0.9}};
        const std::vector<PixelBox> gts{box(0, 0, 10, 10)};
        CHECK(match_instances(preds, gts, 0.5).counts == ConfusionCounts{1, 0, 0});
    }
    SUBCASE("two predictions on one gt: the more confident wins") {
        IouMatrix m{2, 1, {0.8, 0.9}};
        const std::vector<double> conf{0.95, 0.6};
        const auto r = match_instances(m, conf, 0.5);
        CHECK(r.counts == ConfusionCounts{1, 1, 0});
        REQUIRE(r.matches.size() == 1);
        CHECK(r.matches[0].pred == 0);
        CHECK(r.pred_matched == std::vector<bool>{true, false});
    }
    SUBCASE("threshold is inclusive, just below misses") {
        IouMatrix below{1, 1, {0.49}};
        IouMatrix at{1, 1, {0.5}};
        const std::vector<double> conf{1.0};
        CHECK(match_instances(below, conf, 0.5).counts == ConfusionCounts{0, 1, 1});
        CHECK(match_instances(at, conf, 0.5).counts == ConfusionCounts{1, 0, 0});
    }
    SUBCASE("confidence ties go to the lower index, IoU ties to the lower gt") {
        IouMatrix m{2, 2, {0.7, 0.7, 0.9, 0.0}};
        const std::vector<double> conf{0.5, 0.5};
        const auto r = match_instances(m, conf, 0.5);
        REQUIRE(r.matches.size() == 1);
        CHECK(r.matches[0].pred == 0);
        CHECK(r.matches[0].gt == 0);  // pred 1 then finds its only candidate taken
    }
}

TEST_CASE("property: 200 random mask fixtures agree with the naive oracles exactly") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> count(0, 8);
    std::uniform_real_distribution<double> conf(0.0, 1.0);
    const double thresholds[] = {0.1, 0.3, 0.5, 0.7, 0.9};
    for (int t = 0; t < 200; ++t) {
        std::vector<InstanceMask> preds, gts;
        std::vector<double> confidences;
        const int np = count(rng), ng = count(rng);
        for (int i = 0; i < np; ++i) {
            // Quantized confidences make ties common.
            const double c = std::round(conf(rng) * 4) / 4;
            preds.push_back(testing::random_blob(rng, 16, 16).with_confidence(c));
            confidences.push_back(c);
        }
        for (int i = 0; i < ng; ++i) gts.push_back(testing::random_blob(rng, 16, 16));
        std::vector<std::vector<double>> table(np, std::vector<double>(ng));
        for (int p = 0; p < np; ++p) {
            for (int g = 0; g < ng; ++g) table[p][g] = testing::naive_mask_iou(preds[p], gts[g]);
        }
        for (double thr : thresholds) {
            const auto lib = match_instances(preds, gts, thr);
            const auto ref = testing::naive_match(table, confidences, thr, std::size_t(ng));
            REQUIRE(lib.counts == ref.counts);
            std::vector<int> lib_gt(np, -1);
            for (const auto& m : lib.matches) {
                CHECK(m.iou >= thr);
                lib_gt[m.pred] = int(m.gt);
            }
            REQUIRE(lib_gt == ref.gt_of_pred);
        }
        REQUIRE(confusion_semantic(preds, gts, {16, 16}) == testing::naive_semantic(preds, gts, 16, 16));
    }
}

TEST_CASE("AP: worked examples") {
    const std::vector<RankedPrediction> one_tp{{0.9, true}};
    CHECK(average_precision_11pt(one_tp, 1).value == 1.0);
    const std::vector<RankedPrediction> fp_tp{{0.9, false}, {0.8, true}};
    CHECK(average_precision_11pt(fp_tp, 1).value == doctest::Approx(0.5));
    const std::vector<RankedPrediction> tp_tp{{0.9, true}, {0.8, true}};
    CHECK(average_precision_11pt(tp_tp, 2).value == 1.0);
    // Order comes from the confidences, not the input order.
    const std::vector<RankedPrediction> shuffled{{0.8, true}, {0.9, false}};
    CHECK(average_precision_11pt(shuffled, 1).value == doctest::Approx(0.5));
    // Half the ground truth found, perfectly ranked: points 0..0.5 score 1.
    const std::vector<RankedPrediction> half{{0.9, true}};
    CHECK(average_precision_11pt(half, 2).value == doctest::Approx(6.0 / 11.0));
}

TEST_CASE("AP: empty conventions") {
    const auto none = average_precision_11pt({}, 0);
    CHECK(none.value == 1.0);
    CHECK(none.empty_convention);
    const std::vector<RankedPrediction> stray{{0.5, false}};
    const auto fp_only = average_precision_11pt(stray, 0);
    CHECK(fp_only.value == 0.0);
    CHECK_FALSE(fp_only.empty_convention);
    CHECK(average_precision_11pt({}, 3).value == 0.0);
}

TEST_CASE("AP: single image helpers") {
    const std::vector<ScoredBox> preds{{box(50, 50, 5, 5), 0.9}, {box(0, 0, 10, 10), 0.8}};
    const std::vector<PixelBox> gts{box(0, 0, 10, 10)};
    CHECK(average_precision(preds, gts, 0.5).value == doctest::Approx(0.5));
}

TEST_CASE("property: AP is invariant under positive rescaling of confidences (50 rankings)") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0), scale(0.01, 100.0);
    std::uniform_int_distribution<int> len(1, 30);
    for (int t = 0; t < 50; ++t) {
        std::vector<RankedPrediction> r(len(rng));
        std::size_t n_tp = 0;
        for (auto& p : r) {
            p.confidence = u(rng);
            p.true_positive = u(rng) < 0.6;
            n_tp += p.true_positive;
        }
        const std::size_t n_gt = n_tp + std::size_t(len(rng) % 5);
        const double s = scale(rng);
        auto scaled = r;
        for (auto& p : scaled) p.confidence *= s;
        CHECK(average_precision_11pt(r, n_gt).value == average_precision_11pt(scaled, n_gt).value);
    }
}

TEST_CASE("evaluate_dataset: perfect predictions") {
    const std::vector<ImageSample> gt{box_sample("a", {{box(0, 0, 10, 10), 1}, {box(50, 50, 20, 20), 1}})};
    EvalOptions opt;
    opt.task = Task::boxes;
    opt.iou_thresholds = {0.3, 0.5};
    const auto report = evaluate_dataset(gt, gt, opt);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        CHECK(*row.ap == 1.0);
        CHECK(row.prf.precision == 1.0);
        CHECK(row.prf.recall == 1.0);
        CHECK(row.prf.f1 == 1.0);
    }
    CHECK(report.warnings.empty());
}

TEST_CASE("evaluate_dataset: hand-counted two-image fixture") {
    // Image a: exact hit, a shifted hit (IoU 2/3), a stray box, and a
    // low-confidence exact hit on the third gt that the 0.9 filter removes.
    // Image b: one exact hit, one missed gt.
    const std::vector<ImageSample> gt{
        box_sample("a", {{box(0, 0, 10, 10), 1}, {box(20, 0, 10, 10), 1}, {box(40, 0, 10, 10), 1}}),
        box_sample("b", {{box(0, 0, 10, 10), 1}, {box(50, 50, 10, 10), 1}}),
    };
    const std::vector<ImageSample> pred{
        box_sample("a", {{box(0, 0, 10, 10), 0.95},
                         {box(22, 0, 10, 10), 0.93},
                         {box(100, 100, 5, 5), 0.92},
                         {box(40, 0, 10, 10), 0.5}}),
        box_sample("b", {{box(0, 0, 10, 10), 0.99}}),
    };
    EvalOptions opt;
    opt.task = Task::boxes;
    opt.iou_thresholds = {0.5, 0.7};
    const auto report = evaluate_dataset(pred, gt, opt);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].counts == ConfusionCounts{3, 1, 2});
    // Ranking .99 tp, .95 tp, .93 tp, .92 fp, .5 tp over 5 gts: precision 1
    // up to recall 0.6, 0.8 at recall 0.8, nothing beyond.
    CHECK(*report.rows[0].ap == doctest::Approx(8.6 / 11.0));
    // At 0.7 the shifted box no longer matches.
    CHECK(report.rows[1].counts == ConfusionCounts{2, 2, 3});
    // Per-image breakdown sums to the accumulated row.
    ConfusionCounts sum;
    for (const auto& r : report.per_image) {
        if (*r.iou == 0.5) sum += r.counts;
    }
    CHECK(sum == report.rows[0].counts);
}

TEST_CASE("evaluate_dataset: missing and extra prediction images") {
    const std::vector<ImageSample> gt{box_sample("a", {{box(0, 0, 10, 10), 1}}), box_sample("b", {{box(0, 0, 10, 10), 1}})};
    const std::vector<ImageSample> pred{box_sample("a", {{box(0, 0, 10, 10), 1}}), box_sample("zzz", {})};
    EvalOptions opt;
    opt.task = Task::boxes;
    opt.iou_thresholds = {0.5};
    const auto report = evaluate_dataset(pred, gt, opt);
    CHECK(report.rows[0].counts == ConfusionCounts{1, 0, 1});
    CHECK(report.warnings.size() == 2);
}

TEST_CASE("evaluate_dataset: threshold validation") {
    const std::vector<ImageSample> gt{box_sample("a", {{box(0, 0, 10, 10), 1}})};
    EvalOptions opt;
    opt.task = Task::boxes;
    opt.iou_thresholds = {0.5, 0.3};
    CHECK_THROWS_AS(evaluate_dataset(gt, gt, opt), ValidationError);
    opt.iou_thresholds = {0.0};
    CHECK_THROWS_AS(evaluate_dataset(gt, gt, opt), ValidationError);
    opt.iou_thresholds = {};
    CHECK_THROWS_AS(evaluate_dataset(gt, gt, opt), ValidationError);
}

TEST_CASE("evaluate_dataset: semantic task accumulates pixels") {
    ImageSample g{"a", {4, 2}, {}, std::vector<InstanceMask>{InstanceMask(4, 2, {1, 1, 1, 1, 0, 0, 0, 0})}};
    ImageSample p{"a", {4, 2}, {}, std::vector<InstanceMask>{InstanceMask(4, 2, {0, 0, 1, 1, 1, 0, 0, 0}, 0.95),
                                                               InstanceMask(4, 2, {1, 0, 0, 0, 0, 0, 0, 0}, 0.2)}};
    EvalOptions opt;
    opt.task = Task::semantic;
    const auto report = evaluate_dataset(std::vector{p}, std::vector{g}, opt);
    REQUIRE(report.rows.size() == 1);
    CHECK_FALSE(report.rows[0].iou);
    CHECK_FALSE(report.rows[0].ap);
    // The 0.2 mask is below the confidence filter.
    CHECK(report.rows[0].counts == ConfusionCounts{2, 1, 2});
    opt.confidence_threshold = 0.0;
    CHECK(evaluate_dataset(std::vector{p}, std::vector{g}, opt).rows[0].counts == ConfusionCounts{3, 1, 1});
}

TEST_CASE("evaluate_dataset: instance task needs prediction masks") {
    ImageSample g{"a", {4, 2}, {{box(0, 0, 4, 1), 1}}, std::vector<InstanceMask>{InstanceMask(4, 2, {1, 1, 1, 1, 0, 0, 0, 0})}};
    ImageSample p{"a", {4, 2}, {{box(0, 0, 4, 1), 1}}, std::nullopt};
    CHECK_THROWS_AS(evaluate_dataset(std::vector{p}, std::vector{g}, EvalOptions{}), ValidationError);
}

TEST_CASE("property: recall never increases with a stricter IoU threshold") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> count(0, 8);
    std::uniform_real_distribution<double> conf(0.85, 1.0);
    for (int t = 0; t < 300; ++t) {
        std::vector<ImageSample> preds, gts;
        for (int img = 0; img < 3; ++img) {
            const std::string id = "img" + std::to_string(img);
            ImageSample g{id, {16, 16}, {}, std::vector<InstanceMask>{}};
            ImageSample p{id, {16, 16}, {}, std::vector<InstanceMask>{}};
            for (int i = count(rng); i > 0; --i) g.masks->push_back(testing::random_blob(rng, 16, 16));
            for (int i = count(rng); i > 0; --i) p.masks->push_back(testing::random_blob(rng, 16, 16).with_confidence(conf(rng)));
            gts.push_back(std::move(g));
            preds.push_back(std::move(p));
        }
        const auto report = evaluate_dataset(preds, gts, EvalOptions{});
        for (std::size_t i = 1; i < report.rows.size(); ++i) {
            CHECK(report.rows[i].prf.recall <= report.rows[i - 1].prf.recall);
            CHECK(report.rows[i].counts.tp <= report.rows[i - 1].counts.tp);
        }
    }
}

TEST_CASE("report emission") {
    const std::vector<ImageSample> gt{box_sample("a", {{box(0, 0, 10, 10), 1}})};
    EvalOptions opt;
    opt.task = Task::boxes;
    opt.iou_thresholds = {0.5};
    const auto report = evaluate_dataset(gt, gt, opt);
    CHECK(report_to_csv(report) ==
          "iou,ap,precision,recall,f1,tp,fp,fn\n0.500000,1.000000,1.000000,1.000000,1.000000,1,0,0\n");
    const auto json = report_to_json(report);
    CHECK(json.find("\"task\": \"boxes\"") != std::string::npos);
    CHECK(json.find("\"ap_variant\": \"voc11\"") != std::string::npos);
    CHECK(json.find("\"aggregation\": \"accumulated\"") != std::string::npos);
    CHECK(json.find("\"iou\": 0.500000, \"ap\": 1.000000") != std::string::npos);
    CHECK(parse_task("instances") == Task::instances);
    CHECK_FALSE(parse_task("panoptic"));
}
