#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tinydet/eval.hpp"
#include "tinydet/rng.hpp"

#include "support/pr_oracle.hpp"

using Catch::Matchers::WithinAbs;
using tinydet::Box;
using tinydet::Detection;
using tinydet::EvalConfig;
using tinydet::EvalReport;
using tinydet::GroundTruthSet;
using tinydet::GtAnnotation;
using tinydet::SizeBucket;

namespace {

GroundTruthSet make_gts(const std::vector<GtAnnotation>& anns, int64_t n_images,
                        const std::vector<int64_t>& cats) {
    GroundTruthSet gts;
    for (int64_t i = 1; i <= n_images; ++i)
        gts.image_ids.insert(i);
    for (int64_t c : cats)
        gts.categories[c] = "cat" + std::to_string(c);
    gts.annotations = anns;
    return gts;
}

bool close(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return std::abs(*a - *b) <= 1e-9;
}

} // namespace

TEST_CASE("size buckets at the canonical sizes") {
    const std::vector<double> edges = {2, 8, 16, 32, 64};
    CHECK(tinydet::size_bucket(Box{0, 0, 4, 4}, edges) == SizeBucket::very_tiny);
    CHECK(tinydet::size_bucket(Box{0, 0, 12, 12}, edges) == SizeBucket::tiny);
    CHECK(tinydet::size_bucket(Box{0, 0, 20, 20}, edges) == SizeBucket::small);
    CHECK(tinydet::size_bucket(Box{0, 0, 40, 40}, edges) == SizeBucket::medium);
}

TEST_CASE("size bucket edges are half-open") {
    const std::vector<double> edges = {2, 8, 16, 32, 64};
    // lower edge belongs to the bucket, upper edge to the next one up
    CHECK(tinydet::size_bucket(Box{0, 0, 2, 2}, edges) == SizeBucket::very_tiny);
    CHECK(tinydet::size_bucket(Box{0, 0, 8, 8}, edges) == SizeBucket::tiny);
    CHECK(tinydet::size_bucket(Box{0, 0, 16, 16}, edges) == SizeBucket::small);
    CHECK(tinydet::size_bucket(Box{0, 0, 32, 32}, edges) == SizeBucket::medium);
    CHECK(tinydet::size_bucket(Box{0, 0, 64, 64}, edges) == SizeBucket::out_of_range);
    CHECK(tinydet::size_bucket(Box{0, 0, 1.9, 1.9}, edges) == SizeBucket::out_of_range);
    // size is the geometric mean of the sides
    CHECK(tinydet::size_bucket(Box{0, 0, 4, 16}, edges) == SizeBucket::tiny);
}

TEST_CASE("config validation") {
    EvalConfig cfg;
    CHECK_NOTHROW(tinydet::validate_config(cfg));
    cfg.iou_thresholds = {0.5, 0.5};
    CHECK_THROWS_AS(tinydet::validate_config(cfg), tinydet::config_error);
    cfg.iou_thresholds = {0.0, 0.5};
    CHECK_THROWS_AS(tinydet::validate_config(cfg), tinydet::config_error);
    cfg = EvalConfig{};
    cfg.recall_points = 1;
    CHECK_THROWS_AS(tinydet::validate_config(cfg), tinydet::config_error);
    cfg = EvalConfig{};
    cfg.max_dets_per_image = 0;
    CHECK_THROWS_AS(tinydet::validate_config(cfg), tinydet::config_error);
    cfg = EvalConfig{};
    cfg.size_bucket_edges = {2, 8, 16, 32};
    CHECK_THROWS_AS(tinydet::validate_config(cfg), tinydet::config_error);
}

TEST_CASE("greedy matching basics") {
    const std::vector<Box> gt = {{0, 0, 10, 10}};
    SECTION("perfect overlap is a true positive") {
        const std::vector<int> m = tinydet::match_detections(gt, gt, 0.5);
        REQUIRE(m == std::vector<int>{0});
    }
    SECTION("a ground truth matches at most once") {
        const std::vector<Box> dets = {{0, 0, 10, 10}, {1, 1, 10, 10}};
        const std::vector<int> m = tinydet::match_detections(dets, gt, 0.5);
        REQUIRE(m == std::vector<int>{0, -1});
    }
    SECTION("disjoint detection is a false positive") {
        const std::vector<Box> dets = {{50, 50, 10, 10}};
        const std::vector<int> m = tinydet::match_detections(dets, gt, 0.5);
        REQUIRE(m == std::vector<int>{-1});
    }
}

TEST_CASE("greedy matching prefers the highest IoU") {
    const std::vector<Box> gts = {{0, 0, 10, 10}, {2, 0, 10, 10}};
    const std::vector<Box> dets = {{2, 0, 10, 10}};
    const std::vector<int> m = tinydet::match_detections(dets, gts, 0.5);
    REQUIRE(m == std::vector<int>{1});
}

TEST_CASE("greedy matching breaks IoU ties toward the earlier ground truth") {
    const std::vector<Box> gts = {{0, 0, 10, 10}, {0, 0, 10, 10}};
    const std::vector<Box> dets = {{0, 0, 10, 10}, {0, 0, 10, 10}};
    const std::vector<int> m = tinydet::match_detections(dets, gts, 0.5);
    REQUIRE(m == std::vector<int>{0, 1});
}

TEST_CASE("matching accepts IoU exactly at the threshold") {
    // IoU 0.5 exactly against threshold 0.5
    const std::vector<Box> gts = {{0, 0, 2, 2}};
    const std::vector<Box> dets = {{0, 0, 2, 1}};
    CHECK(tinydet::match_detections(dets, gts, 0.5) == std::vector<int>{0});
    CHECK(tinydet::match_detections(dets, gts, 0.75) == std::vector<int>{-1});
}

TEST_CASE("average precision basics") {
    SECTION("one true positive, one gt") {
        const std::vector<char> flags = {1};
        CHECK(tinydet::average_precision(flags, 1, 101) == 1.0);
    }
    SECTION("one false positive, one gt") {
        const std::vector<char> flags = {0};
        CHECK(tinydet::average_precision(flags, 1, 101) == 0.0);
    }
    SECTION("fp before tp gives precision one half") {
        const std::vector<char> flags = {0, 1};
        CHECK_THAT(tinydet::average_precision(flags, 1, 101), WithinAbs(0.5, 1e-12));
    }
    SECTION("no ground truth reports zero") {
        const std::vector<char> flags = {1, 1};
        CHECK(tinydet::average_precision(flags, 0, 101) == 0.0);
    }
    SECTION("half recall at full precision") {
        const std::vector<char> flags = {1};
        // 1 of 2 gts found: precision 1 up to recall 0.5, zero beyond
        CHECK_THAT(tinydet::average_precision(flags, 2, 101),
                   WithinAbs(51.0 / 101.0, 1e-12));
    }
}

TEST_CASE("perfect detections score one everywhere") {
    const std::vector<GtAnnotation> anns = {
        {1, 1, {0, 0, 4, 4}},
        {1, 1, {20, 20, 12, 12}},
        {2, 1, {5, 5, 20, 20}},
        {2, 2, {40, 40, 40, 40}},
    };
    const GroundTruthSet gts = make_gts(anns, 2, {1, 2});
    std::vector<Detection> dets;
    for (const auto& a : anns)
        dets.push_back({a.image_id, a.category_id, a.box, 1.0});
    const EvalReport r = tinydet::evaluate(gts, dets, EvalConfig{});
    REQUIRE(r.ap.has_value());
    CHECK(*r.ap == 1.0);
    CHECK(*r.ap50 == 1.0);
    CHECK(*r.ap75 == 1.0);
    CHECK(*r.ap_vt == 1.0);
    CHECK(*r.ap_t == 1.0);
    CHECK(*r.ap_s == 1.0);
    CHECK(*r.ap_m == 1.0);
    CHECK(r.per_category.at(1) == 1.0);
    CHECK(r.per_category.at(2) == 1.0);
}

TEST_CASE("empty detection set scores zero") {
    const std::vector<GtAnnotation> anns = {{1, 1, {0, 0, 4, 4}}};
    const GroundTruthSet gts = make_gts(anns, 1, {1});
    const EvalReport r = tinydet::evaluate(gts, {}, EvalConfig{});
    REQUIRE(r.ap.has_value());
    CHECK(*r.ap == 0.0);
    CHECK(*r.ap50 == 0.0);
    CHECK(*r.ap_vt == 0.0);
    CHECK_FALSE(r.ap_m.has_value()); // no medium gt anywhere
}

TEST_CASE("no ground truth at all leaves every metric absent") {
    const GroundTruthSet gts = make_gts({}, 1, {1});
    const EvalReport r = tinydet::evaluate(gts, {}, EvalConfig{});
    CHECK_FALSE(r.ap.has_value());
    CHECK_FALSE(r.ap50.has_value());
    CHECK(r.per_category.empty());
}

TEST_CASE("categories without ground truth are excluded") {
    const std::vector<GtAnnotation> anns = {{1, 1, {0, 0, 10, 10}}};
    const GroundTruthSet gts = make_gts(anns, 1, {1, 2});
    // detections of category 2 cannot drag the mean down, the category
    // has no gt and is excluded outright
    const std::vector<Detection> dets = {
        {1, 1, {0, 0, 10, 10}, 0.9},
        {1, 2, {50, 50, 10, 10}, 0.95},
    };
    const EvalReport r = tinydet::evaluate(gts, dets, EvalConfig{});
    CHECK(*r.ap == 1.0);
    CHECK(r.per_category.count(2) == 0);
}

TEST_CASE("unknown detection ids are rejected with a full listing") {
    const GroundTruthSet gts = make_gts({{1, 1, {0, 0, 10, 10}}}, 1, {1});
    const std::vector<Detection> dets = {
        {9, 1, {0, 0, 10, 10}, 0.9},
        {1, 7, {0, 0, 10, 10}, 0.8},
        {1, 1, {0, 0, 10, 10}, 0.7},
    };
    try {
        tinydet::evaluate(gts, dets, EvalConfig{});
        FAIL("expected parse_error");
    } catch (const tinydet::parse_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("detection 0") != std::string::npos);
        CHECK(msg.find("image_id 9") != std::string::npos);
        CHECK(msg.find("detection 1") != std::string::npos);
        CHECK(msg.find("category_id 7") != std::string::npos);
        CHECK(msg.find("detection 2") == std::string::npos);
    }
}

TEST_CASE("per-image truncation happens before category split") {
    const std::vector<GtAnnotation> anns = {
        {1, 1, {0, 0, 10, 10}},
        {1, 2, {30, 30, 10, 10}},
    };
    const GroundTruthSet gts = make_gts(anns, 1, {1, 2});
    // the category-2 detection is the lowest scored of three in the image;
    // with max_dets 2 it is dropped even though it is the only one of its
    // category
    const std::vector<Detection> dets = {
        {1, 1, {0, 0, 10, 10}, 0.9},
        {1, 1, {1, 1, 10, 10}, 0.8},
        {1, 2, {30, 30, 10, 10}, 0.7},
    };
    EvalConfig cfg;
    cfg.max_dets_per_image = 2;
    const EvalReport r = tinydet::evaluate(gts, dets, cfg);
    CHECK(r.per_category.at(1) == 1.0);
    CHECK(r.per_category.at(2) == 0.0);

    cfg.max_dets_per_image = 3;
    const EvalReport full = tinydet::evaluate(gts, dets, cfg);
    CHECK(full.per_category.at(2) == 1.0);
}

TEST_CASE("detections matched outside a bucket are ignored for that bucket") {
    // one tiny gt and one medium gt; the medium det scores higher
    const std::vector<GtAnnotation> anns = {
        {1, 1, {0, 0, 4, 4}},
        {1, 1, {50, 50, 40, 40}},
    };
    const GroundTruthSet gts = make_gts(anns, 1, {1});
    const std::vector<Detection> dets = {
        {1, 1, {50, 50, 40, 40}, 0.9}, // matches the medium gt
        {1, 1, {100, 100, 4, 4}, 0.8}, // false positive
        {1, 1, {0, 0, 4, 4}, 0.7},     // matches the very tiny gt
    };
    const EvalReport r = tinydet::evaluate(gts, dets, EvalConfig{});
    // very tiny sequence: the medium match is dropped, leaving FP then TP
    REQUIRE(r.ap_vt.has_value());
    CHECK_THAT(*r.ap_vt, WithinAbs(0.5, 1e-9));
    // medium sequence: TP first, later entries FP or dropped
    REQUIRE(r.ap_m.has_value());
    CHECK(*r.ap_m == 1.0);
}

TEST_CASE("monotonicity: adding a perfect detection never hurts") {
    tinydet::SplitRng rng = tinydet::SplitRng(17).split("mono");
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<GtAnnotation> anns;
        const int n_gt = 2 + static_cast<int>(rng.uniform_index(4));
        for (int g = 0; g < n_gt; ++g) {
            const double side = rng.uniform(3.0, 50.0);
            anns.push_back({1, 1,
                            {rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0), side, side}});
        }
        const GroundTruthSet gts = make_gts(anns, 1, {1});
        std::vector<Detection> dets;
        const int n_det = static_cast<int>(rng.uniform_index(4));
        for (int d = 0; d < n_det; ++d) {
            const double side = rng.uniform(3.0, 50.0);
            dets.push_back({1, 1,
                            {rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0), side, side},
                            rng.uniform(0.0, 0.8)});
        }
        const EvalReport before = tinydet::evaluate(gts, dets, EvalConfig{});
        dets.push_back({1, 1, anns[0].box, 0.99}); // top-scored exact duplicate
        const EvalReport after = tinydet::evaluate(gts, dets, EvalConfig{});
        if (before.ap && after.ap) CHECK(*after.ap >= *before.ap);
        if (before.ap50 && after.ap50) CHECK(*after.ap50 >= *before.ap50);
    }
}

TEST_CASE("permutation invariance with distinct scores") {
    const std::vector<GtAnnotation> anns = {
        {1, 1, {0, 0, 10, 10}},
        {2, 1, {5, 5, 20, 20}},
    };
    const GroundTruthSet gts = make_gts(anns, 2, {1});
    std::vector<Detection> dets = {
        {1, 1, {0, 0, 10, 11}, 0.9},
        {1, 1, {2, 2, 10, 10}, 0.6},
        {2, 1, {5, 5, 21, 20}, 0.8},
        {2, 1, {50, 50, 20, 20}, 0.3},
    };
    const EvalReport base = tinydet::evaluate(gts, dets, EvalConfig{});
    std::reverse(dets.begin(), dets.end());
    const EvalReport rev = tinydet::evaluate(gts, dets, EvalConfig{});
    CHECK(close(base.ap, rev.ap));
    CHECK(close(base.ap50, rev.ap50));
    CHECK(close(base.ap75, rev.ap75));
    CHECK(close(base.ap_vt, rev.ap_vt));
    CHECK(close(base.ap_s, rev.ap_s));
}

TEST_CASE("ap never increases with a stricter threshold") {
    tinydet::SplitRng rng = tinydet::SplitRng(19).split("thr-mono");
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<GtAnnotation> anns;
        std::vector<Detection> dets;
        for (int g = 0; g < 4; ++g) {
            const double side = rng.uniform(4.0, 40.0);
            const Box b{rng.uniform(0.0, 150.0), rng.uniform(0.0, 150.0), side, side};
            anns.push_back({1, 1, b});
            Box noisy = b;
            noisy.x += rng.uniform(-0.3, 0.3) * side;
            noisy.y += rng.uniform(-0.3, 0.3) * side;
            dets.push_back({1, 1, noisy, rng.uniform(0.1, 1.0)});
        }
        const GroundTruthSet gts = make_gts(anns, 1, {1});
        double prev = 2.0;
        for (double thr : {0.5, 0.65, 0.8, 0.95}) {
            EvalConfig cfg;
            cfg.iou_thresholds = {thr};
            const EvalReport r = tinydet::evaluate(gts, dets, cfg);
            REQUIRE(r.ap.has_value());
            CHECK(*r.ap <= prev + 1e-12);
            prev = *r.ap;
        }
    }
}

TEST_CASE("evaluate matches the brute-force oracle on random instances") {
    tinydet::SplitRng root = tinydet::SplitRng(23).split("oracle-unit");
    for (int trial = 0; trial < 30; ++trial) {
        tinydet::SplitRng rng = root.split(static_cast<uint64_t>(trial));
        const int n_images = 1 + static_cast<int>(rng.uniform_index(3));
        const int n_cats = 1 + static_cast<int>(rng.uniform_index(2));
        std::vector<int64_t> cats;
        for (int c = 1; c <= n_cats; ++c)
            cats.push_back(c);

        std::vector<GtAnnotation> anns;
        std::vector<Detection> dets;
        for (int img = 1; img <= n_images; ++img) {
            const int n_gt = static_cast<int>(rng.uniform_index(6));
            for (int g = 0; g < n_gt; ++g) {
                const double w = rng.uniform(2.0, 70.0);
                const double h = rng.uniform(2.0, 70.0);
                anns.push_back({img, static_cast<int64_t>(1 + rng.uniform_index(n_cats)),
                                {rng.uniform(0.0, 180.0), rng.uniform(0.0, 180.0), w, h}});
            }
            const int n_det = static_cast<int>(rng.uniform_index(8));
            for (int d = 0; d < n_det; ++d) {
                Box b;
                if (!anns.empty() && rng.coin()) {
                    // jitter an existing gt so matches actually occur
                    const GtAnnotation& a = anns[rng.uniform_index(anns.size())];
                    b = a.box;
                    b.x += rng.uniform(-0.3, 0.3) * b.w;
                    b.y += rng.uniform(-0.3, 0.3) * b.h;
                } else {
                    b = {rng.uniform(0.0, 180.0), rng.uniform(0.0, 180.0),
                         rng.uniform(2.0, 70.0), rng.uniform(2.0, 70.0)};
                }
                // quantized scores force ties through the stable-order path
                const double score = rng.uniform_index(5) * 0.25;
                dets.push_back({img, static_cast<int64_t>(1 + rng.uniform_index(n_cats)),
                                b, score});
            }
        }
        const GroundTruthSet gts = make_gts(anns, n_images, cats);
        EvalConfig cfg;
        cfg.max_dets_per_image = 4; // exercise truncation
        const EvalReport got = tinydet::evaluate(gts, dets, cfg);
        const EvalReport want = testsupport::oracle_evaluate(gts, dets, cfg);
        REQUIRE(close(got.ap, want.ap));
        REQUIRE(close(got.ap50, want.ap50));
        REQUIRE(close(got.ap75, want.ap75));
        REQUIRE(close(got.ap_vt, want.ap_vt));
        REQUIRE(close(got.ap_t, want.ap_t));
        REQUIRE(close(got.ap_s, want.ap_s));
        REQUIRE(close(got.ap_m, want.ap_m));
        REQUIRE(got.per_category.size() == want.per_category.size());
        for (const auto& [id, v] : got.per_category)
            REQUIRE_THAT(v, WithinAbs(want.per_category.at(id), 1e-9));
    }
}
