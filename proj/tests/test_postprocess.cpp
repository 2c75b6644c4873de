#include <catch_amalgamated.hpp>

#include "dbtkit/postprocess.hpp"
#include "oracles.hpp"

using namespace dbtkit;

namespace {

Prediction pred(double x, double y, double w, double h, double score, int slice = 0) {
    Prediction p;
    p.box = Box2D{x, y, w, h};
    p.score = score;
    p.center_slice = slice;
    return p;
}

}  // namespace

TEST_CASE("iou: identity, disjoint, pixel-enumeration case") {
    Box2D a{0, 0, 10, 10};
    CHECK(iou(a, a) == Catch::Approx(1.0));
    CHECK(iou(a, Box2D{20, 20, 5, 5}) == 0.0);
    // 10x10 boxes overlapping by 5: 50 / 150
    CHECK(iou(a, Box2D{5, 0, 10, 10}) == Catch::Approx(1.0 / 3.0));
    CHECK(iou(a, Box2D{5, 0, 10, 10}) ==
          Catch::Approx(oracles::iou_pixel_enum(a, Box2D{5, 0, 10, 10})));
}

TEST_CASE("iou is symmetric and bounded") {
    Rng rng(31);
    for (int i = 0; i < 500; ++i) {
        Box2D a{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 60), rng.uniform(1, 60)};
        Box2D b{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 60), rng.uniform(1, 60)};
        const double v = iou(a, b);
        CHECK(v == iou(b, a));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("combine_volume_predictions: identical slices reproduce one slice per half") {
    GridSpec spec{96, 256, 3, 3};
    GridOutput g(3, 3);
    g.at(1, 1) = CellPred{0.8, 0.1, -0.1, 0.2, 0.0};
    std::vector<GridOutput> grids(4, g);

    auto preds = combine_volume_predictions(grids, spec, 0.5);
    REQUIRE(preds.size() == 2);  // one per half
    CHECK(preds[0].score == Catch::Approx(0.8));
    CHECK(preds[1].score == Catch::Approx(0.8));
    CHECK(preds[0].box.center_x() == Catch::Approx(preds[1].box.center_x()));
    CHECK(preds[0].center_slice == 0);  // middle of [0,2)
    CHECK(preds[1].center_slice == 2);  // middle of [2,4)
}

TEST_CASE("combine_volume_predictions averages objectness arithmetically") {
    GridSpec spec{96, 256, 2, 2};
    GridOutput a(2, 2), b(2, 2);
    a.at(0, 0).objectness = 0.2;
    b.at(0, 0).objectness = 0.8;
    auto preds = combine_volume_predictions({a, b}, spec, 0.0);
    // odd split: first half = slice 0 only, second half = slice 1 only? No:
    // Z=2 -> halves [0,1) and [1,2), so no averaging happens across them.
    REQUIRE(preds.size() == 8);  // threshold 0 emits every cell of both halves
    // same two slices in ONE half:
    auto merged = combine_volume_predictions({a, b, a, b}, spec, 0.0);
    bool found = false;
    for (const auto& p : merged)
        if (p.center_slice == 0 && p.score == Catch::Approx(0.5)) found = true;
    CHECK(found);
}

TEST_CASE("combine_volume_predictions equals a brute-force per-cell mean") {
    GridSpec spec{96, 256, 4, 3};
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const int z = static_cast<int>(rng.uniform_int(1, 9));
        std::vector<GridOutput> grids;
        for (int s = 0; s < z; ++s) {
            GridOutput g(4, 3);
            for (auto& c : g.cells)
                c = CellPred{rng.uniform(), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                             rng.uniform(-1, 1), rng.uniform(-1, 1)};
            grids.push_back(g);
        }
        auto preds = combine_volume_predictions(grids, spec, 0.0);

        const int split = (z + 1) / 2;
        std::vector<std::pair<int, int>> halves{{0, split}, {split, z}};
        std::size_t pi = 0;
        for (auto [lo, hi] : halves) {
            if (lo == hi) continue;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 3; ++c) {
                    double sum = 0.0;
                    for (int s = lo; s < hi; ++s) sum += grids[s].at(r, c).objectness;
                    const double mean = sum / (hi - lo);
                    REQUIRE(pi < preds.size());
                    CHECK(std::abs(preds[pi].score - mean) < 1e-9);
                    ++pi;
                }
        }
        CHECK(pi == preds.size());
    }
}

TEST_CASE("filter_by_breast_mask: inside kept, outside dropped, 50% boundary kept") {
    BreastMask mask;
    mask.rows = 10;
    mask.cols = 10;
    Mask2D slice(10, 10);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 5; ++c) slice.at(r, c) = 1;  // left half on
    mask.slices = {slice};

    auto inside = pred(0, 0, 4, 4, 0.9);
    auto outside = pred(6, 0, 4, 4, 0.9);
    auto boundary = pred(0, 0, 10, 10, 0.9);  // exactly 50% covered

    auto kept = filter_by_breast_mask({inside, outside, boundary}, mask);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].box.x == 0.0);
    CHECK(kept[1].box.width == 10.0);  // the 50% box survives
}

TEST_CASE("filter_by_breast_mask: all-ones mask is the identity") {
    BreastMask mask;
    mask.rows = 20;
    mask.cols = 20;
    Mask2D ones(20, 20);
    for (auto& px : ones.data) px = 1;
    mask.slices = {ones};

    Rng rng(33);
    std::vector<Prediction> preds;
    for (int i = 0; i < 30; ++i)
        preds.push_back(pred(rng.uniform(0, 15), rng.uniform(0, 15), rng.uniform(1, 5),
                             rng.uniform(1, 5), rng.uniform(0.1, 1.0)));
    auto kept = filter_by_breast_mask(preds, mask);
    CHECK(kept.size() == preds.size());
}

TEST_CASE("filter_by_breast_mask matches a pixel-count oracle") {
    Rng rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        BreastMask mask;
        mask.rows = 16;
        mask.cols = 16;
        mask.slices = {oracles::random_mask(rng, 16, 16, 0.5)};
        const auto& m = mask.slices[0];

        const int bx = static_cast<int>(rng.uniform_int(0, 10));
        const int by = static_cast<int>(rng.uniform_int(0, 10));
        const int bw = static_cast<int>(rng.uniform_int(1, 6));
        const int bh = static_cast<int>(rng.uniform_int(1, 6));
        auto p = pred(bx, by, bw, bh, 0.5);

        long on = 0;
        for (int r = by; r < by + bh; ++r)
            for (int c = bx; c < bx + bw; ++c)
                if (m.at(r, c)) ++on;
        const bool expect_keep = static_cast<double>(on) / (bw * bh) >= 0.5;
        CHECK(filter_by_breast_mask({p}, mask).size() == (expect_keep ? 1u : 0u));
    }
}

TEST_CASE("ratio_nms: merge keeps the higher-score geometry and score") {
    auto hi = pred(0, 0, 10, 10, 0.9);
    auto lo = pred(2, 0, 10, 10, 0.5);  // IoU = 80/120 = 2/3 > 0.5, ratio 1.8 < 10
    auto out = ratio_nms({hi, lo}, MergeRule{});
    REQUIRE(out.size() == 1);
    CHECK(out[0].score == 0.9);
    CHECK(out[0].box.x == 0.0);
}

TEST_CASE("ratio_nms: ratio at 20 keeps both boxes") {
    auto hi = pred(0, 0, 10, 10, 0.9);
    auto lo = pred(2, 0, 10, 10, 0.045);
    auto out = ratio_nms({hi, lo}, MergeRule{});
    CHECK(out.size() == 2);
}

TEST_CASE("ratio_nms: IoU below the gate keeps both boxes") {
    auto hi = pred(0, 0, 10, 10, 0.9);
    auto lo = pred(6, 0, 10, 10, 0.5);  // IoU = 40/160 = 0.25
    auto out = ratio_nms({hi, lo}, MergeRule{});
    CHECK(out.size() == 2);
}

TEST_CASE("ratio_nms post-condition, idempotence, score provenance") {
    Rng rng(35);
    const MergeRule rule{};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Prediction> preds;
        const int n = static_cast<int>(rng.uniform_int(0, 15));
        for (int i = 0; i < n; ++i)
            preds.push_back(pred(rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(5, 30),
                                 rng.uniform(5, 30), rng.uniform(0.01, 1.0)));
        auto out = ratio_nms(preds, rule);

        CHECK(out.size() <= preds.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            // every surviving score existed in the input
            bool found = false;
            for (const auto& p : preds)
                if (p.score == out[i].score) found = true;
            CHECK(found);
            for (std::size_t j = i + 1; j < out.size(); ++j) {
                const double ratio = std::max(out[i].score, out[j].score) /
                                     std::min(out[i].score, out[j].score);
                const bool mergeable =
                    ratio < rule.max_score_ratio && iou(out[i].box, out[j].box) > rule.min_iou;
                CHECK_FALSE(mergeable);
            }
        }

        auto again = ratio_nms(out, rule);
        REQUIRE(again.size() == out.size());
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].score == out[i].score);

        // output sorted by descending score
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
    }
}
