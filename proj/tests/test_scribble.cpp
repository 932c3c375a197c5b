#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>

#include "grapetrack/error.hpp"
#include "grapetrack/scribble_seg.hpp"

using namespace grapetrack;

namespace {

using Rgb = std::array<std::uint8_t, 3>;
constexpr Rgb kLeaf{40, 90, 30};
constexpr Rgb kGrape{200, 190, 60};

RgbImage paint(int w, int h, const std::function<Rgb(int, int)>& color) {
    RgbImage img{w, h, std::vector<std::uint8_t>(std::size_t(w) * h * 3)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Rgb c = color(x, y);
            std::copy(c.begin(), c.end(), img.rgb.begin() + 3 * (std::size_t(y) * w + x));
        }
    }
    return img;
}

Stroke stroke(SegLabel label, std::vector<std::array<int, 2>> pixels) { return {label, std::move(pixels)}; }

// Every region id in 0..count-1 is used and forms one 4-connected component.
bool regions_valid(const RegionMap& m) {
    if (m.labels.size() != std::size_t(m.width) * m.height) return false;
    std::vector<int> components(std::size_t(m.count), 0);
    std::vector<bool> seen(m.labels.size(), false);
    for (std::size_t s = 0; s < m.labels.size(); ++s) {
        if (seen[s]) continue;
        const int id = m.labels[s];
        if (id < 0 || id >= m.count) return false;
        ++components[std::size_t(id)];
        std::vector<std::size_t> stack{s};
        seen[s] = true;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int x = int(p % std::size_t(m.width)), y = int(p / std::size_t(m.width));
            const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || ny[k] < 0 || nx[k] >= m.width || ny[k] >= m.height) continue;
                const std::size_t q = std::size_t(ny[k]) * m.width + nx[k];
                if (!seen[q] && m.labels[q] == id) {
                    seen[q] = true;
                    stack.push_back(q);
                }
            }
        }
    }
    for (int c : components) {
        if (c != 1) return false;
    }
    return true;
}

RgbImage noise_image(std::uint64_t seed, int w, int h) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> v(0, 255);
    return paint(w, h, [&](int, int) { return Rgb{std::uint8_t(v(rng)), std::uint8_t(v(rng)), std::uint8_t(v(rng))}; });
}

}  // namespace

TEST_CASE("watershed: constant image is one region") {
    const auto img = paint(17, 9, [](int, int) { return Rgb{120, 120, 120}; });
    const auto m = watershed_oversegment(luminance(img));
    CHECK(m.count == 1);
    CHECK(regions_valid(m));
    const auto g = build_arg(m, img);
    CHECK(g.vertices.size() == 1);
    CHECK(g.edges.empty());
    CHECK(g.vertices[0].pixel_count == 17u * 9u);
}

// A tone region needs a pixel whose (border-clipped) 3x3 window is uniform,
// otherwise the gradient has no minimum inside it; two columns at the crop
// border are the narrowest such strip.
TEST_CASE("watershed: a vertical step splits exactly at the step") {
    for (int step = 2; step <= 22; ++step) {
        CAPTURE(step);
        const auto img = paint(24, 11, [&](int x, int) { return x < step ? kLeaf : kGrape; });
        const auto m = watershed_oversegment(luminance(img));
        REQUIRE(m.count == 2);
        for (int y = 0; y < 11; ++y) {
            for (int x = 0; x < 24; ++x) CHECK((m.at(x, y) == m.at(0, 0)) == (x < step));
        }
    }
}

TEST_CASE("watershed: a one-pixel strip has no minimum of its own") {
    const auto img = paint(12, 5, [](int x, int) { return x < 1 ? kLeaf : kGrape; });
    CHECK(watershed_oversegment(luminance(img)).count == 1);
}

TEST_CASE("build_arg: half/half geometry and exact means") {
    const auto img = paint(10, 4, [](int x, int) { return x < 5 ? kLeaf : kGrape; });
    const auto m = watershed_oversegment(luminance(img));
    REQUIRE(m.count == 2);
    const auto g = build_arg(m, img);
    REQUIRE(g.edges.size() == 1);
    const int left = m.at(0, 0), right = m.at(9, 0);
    const auto& e = g.edges[0];
    const double diag = std::sqrt(116.0);
    CHECK(g.diagonal == doctest::Approx(diag));
    // Centroids at x = 2 and x = 7; the relation vector runs left to right.
    const double dx = (left == e.a ? 5.0 : -5.0) / diag;
    CHECK(e.dx == doctest::Approx(dx));
    CHECK(e.dy == doctest::Approx(0.0));
    CHECK(g.vertices[std::size_t(left)].mean_color == std::array<double, 3>{40, 90, 30});
    CHECK(g.vertices[std::size_t(right)].centroid_x == 7.0);
    CHECK(g.vertices[std::size_t(right)].centroid_y == 1.5);
}

TEST_CASE("build_arg: means and adjacency match a naive recount") {
    const auto img = noise_image(5, 23, 19);
    const auto m = watershed_oversegment(luminance(img), 30.0);
    REQUIRE(regions_valid(m));
    const auto g = build_arg(m, img);
    std::vector<std::array<double, 4>> sums(std::size_t(m.count), {0, 0, 0, 0});
    std::set<std::pair<int, int>> adj;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            auto& s = sums[std::size_t(m.at(x, y))];
            for (int c = 0; c < 3; ++c) s[std::size_t(c)] += img.pixel(x, y)[c];
            s[3] += 1;
            for (auto [nx, ny] : {std::pair{x + 1, y}, std::pair{x, y + 1}}) {
                if (nx < m.width && ny < m.height && m.at(nx, ny) != m.at(x, y)) {
                    adj.insert(std::minmax(m.at(x, y), m.at(nx, ny)));
                }
            }
        }
    }
    std::size_t total = 0;
    for (int r = 0; r < m.count; ++r) {
        const auto& v = g.vertices[std::size_t(r)];
        total += v.pixel_count;
        CHECK(double(v.pixel_count) == sums[std::size_t(r)][3]);
        for (int c = 0; c < 3; ++c) {
            CHECK(v.mean_color[std::size_t(c)] == doctest::Approx(sums[std::size_t(r)][std::size_t(c)] / sums[std::size_t(r)][3]));
        }
    }
    CHECK(total == std::size_t(m.width) * m.height);
    std::set<std::pair<int, int>> got;
    for (const auto& e : g.edges) got.insert({e.a, e.b});
    CHECK(got == adj);
}

TEST_CASE("watershed: region count does not grow with h_min") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto gray = luminance(noise_image(seed, 21, 17));
        int previous = std::numeric_limits<int>::max();
        for (double h : {0.0, 2.0, 8.0, 16.0, 32.0, 64.0, 128.0, 255.0}) {
            const auto m = watershed_oversegment(gray, h);
            CHECK(regions_valid(m));
            CHECK(m.count <= previous);
            previous = m.count;
        }
    }
    CHECK_THROWS_AS(watershed_oversegment(GrayImage{}, 8.0), ValidationError);
    CHECK_THROWS_AS(watershed_oversegment(luminance(noise_image(1, 3, 3)), -1.0), ValidationError);
}

TEST_CASE("propagate_labels: scribbled regions take the majority, ties go to background") {
    const auto img = paint(10, 4, [](int x, int) { return x < 5 ? kLeaf : kGrape; });
    const auto m = watershed_oversegment(luminance(img));
    const auto g = build_arg(m, img);
    ScribbleSet s{{stroke(SegLabel::grape, {{7, 1}, {8, 1}}), stroke(SegLabel::background, {{1, 1}, {9, 3}})}};
    auto labels = propagate_labels(g, s, m);
    CHECK(labels[std::size_t(m.at(0, 0))] == SegLabel::background);
    CHECK(labels[std::size_t(m.at(9, 0))] == SegLabel::grape);

    s.strokes[1].pixels.push_back({6, 0});  // right region now 2 vs 2
    CHECK_THROWS_AS(propagate_labels(g, s, m), ValidationError);  // no grape region left

    CHECK_THROWS_AS(propagate_labels(g, ScribbleSet{{stroke(SegLabel::grape, {{7, 1}})}}, m), ValidationError);
    CHECK_THROWS_AS(propagate_labels(g, ScribbleSet{{stroke(SegLabel::grape, {{7, 1}}), stroke(SegLabel::background, {{10, 0}})}}, m),
                    ValidationError);
}

TEST_CASE("propagate_labels: unscribbled regions copy the nearest model vertex") {
    // Four vertical bands: leaf, grape, leaf, grape. Only the first two are
    // scribbled; the others follow their color.
    const auto img = paint(40, 6, [](int x, int) { return (x / 10) % 2 == 0 ? kLeaf : kGrape; });
    const auto m = watershed_oversegment(luminance(img));
    REQUIRE(m.count == 4);
    const auto g = build_arg(m, img);
    const ScribbleSet s{{stroke(SegLabel::background, {{2, 2}}), stroke(SegLabel::grape, {{12, 2}})}};
    const auto labels = propagate_labels(g, s, m);
    CHECK(labels[std::size_t(m.at(25, 0))] == SegLabel::background);
    CHECK(labels[std::size_t(m.at(35, 0))] == SegLabel::grape);

    // Idempotence: feeding every region back as a scribble changes nothing.
    ScribbleSet full;
    for (int r = 0; r < m.count; ++r) {
        for (int x = 0; x < 40; ++x) {
            if (m.at(x, 0) == r) {
                full.strokes.push_back(stroke(labels[std::size_t(r)], {{x, 0}}));
                break;
            }
        }
    }
    CHECK(propagate_labels(g, full, m) == labels);
}

TEST_CASE("scribble pipeline: two-tone crops reproduce the analytic partition") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> wd(8, 40), hd(8, 30);
    for (int t = 0; t < 30; ++t) {
        const int w = wd(rng), h = hd(rng);
        // At least 3x3 of grape, and a leaf margin of two at the top-left so
        // both tones contain a uniform 3x3 window.
        std::uniform_int_distribution<int> xs(2, w - 3), ys(2, h - 3);
        const int x0 = xs(rng), y0 = ys(rng);
        const int x1 = std::uniform_int_distribution<int>(x0 + 3, w)(rng);
        const int y1 = std::uniform_int_distribution<int>(y0 + 3, h)(rng);
        const PixelRect grape{x0, y0, x1, y1};
        CAPTURE(w);
        CAPTURE(h);
        CAPTURE(x0);
        CAPTURE(y0);
        CAPTURE(x1);
        CAPTURE(y1);
        const auto img = paint(w, h, [&](int x, int y) { return grape.contains(x, y) ? kGrape : kLeaf; });
        const ScribbleSet s{{stroke(SegLabel::grape, {{x0, y0}}), stroke(SegLabel::background, {{0, 0}})}};
        const auto mask = segment_with_scribbles(img, s);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) REQUIRE(mask.test(x, y) == grape.contains(x, y));
        }
        CHECK(mask.tight_box() == grape);
        CHECK(segment_with_scribbles(img, s) == mask);
    }
}

TEST_CASE("extract_instance_mask: clipping and empty results") {
    const auto img = paint(10, 4, [](int x, int) { return x < 5 ? kLeaf : kGrape; });
    const auto m = watershed_oversegment(luminance(img));
    std::vector<SegLabel> labels(std::size_t(m.count), SegLabel::background);
    labels[std::size_t(m.at(9, 0))] = SegLabel::grape;
    const auto full = extract_instance_mask(labels, m, {0, 0, 10, 4});
    CHECK(full.popcount() == 20);
    const auto clipped = extract_instance_mask(labels, m, {0, 0, 7, 4});
    CHECK(clipped.popcount() == 8);
    CHECK(clipped.tight_box() == PixelRect{5, 0, 7, 4});
    CHECK_THROWS_AS(extract_instance_mask(labels, m, {0, 0, 5, 4}), ValidationError);
    CHECK_THROWS_AS(extract_instance_mask(std::vector<SegLabel>{SegLabel::grape}, m, {0, 0, 10, 4}), ContractError);
}

TEST_CASE("parse_scribbles") {
    const auto s = parse_scribbles(R"({"strokes": [{"label": "grape", "pixels": [[1, 2], [3, 4]]},
                                                  {"label": "background", "pixels": []}]})");
    REQUIRE(s.strokes.size() == 2);
    CHECK(s.strokes[0].pixels[1] == std::array<int, 2>{3, 4});
    CHECK(s.strokes[1].label == SegLabel::background);
    CHECK_THROWS_AS(parse_scribbles(R"({"strokes": [{"label": "leaf", "pixels": []}]})"), ParseError);
    CHECK_THROWS_AS(parse_scribbles(R"({"strokes": [{"label": "grape", "pixels": [[1]]}]})"), ParseError);
    CHECK_THROWS_AS(parse_scribbles("[]"), ParseError);
}
