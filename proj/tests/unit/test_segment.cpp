#include <doctest.h>

#include <cmath>

#include "deepcontrast/segment.hpp"
#include "test_helpers.hpp"

using namespace deepcontrast;

TEST_CASE("threshold_mask edge thresholds") {
    const Plane p = testutil::random_plane(16, 16, 3, 1.0f, 9.0f);
    CHECK(threshold_mask(p, 0.0f).count() == p.size());
    CHECK(threshold_mask(p, 100.0f).count() == 0);

    Plane binary(16, 16, 0.0f);
    for (int i = 0; i < 60; ++i) binary.pixels[i] = 1.0f;
    const SegmentationMask m = threshold_mask(binary, 0.5f);
    CHECK(m.count() == 60);
    for (int i = 0; i < 60; ++i) CHECK(m.pixels[i] == 1);
}

TEST_CASE("perfectly separable plane reaches IoU 1") {
    SegmentationMask gt(32, 32);
    for (int y = 10; y < 20; ++y)
        for (int x = 5; x < 25; ++x) gt.set(y, x, true);
    Plane p(32, 32, 0.0f);
    for (size_t i = 0; i < p.pixels.size(); ++i) p.pixels[i] = gt.pixels[i] ? 1.0f : 0.0f;
    const auto [thr, best] = best_threshold_iou(p, gt);
    CHECK(best == 1.0);
    CHECK(thr > 0.0f);
    CHECK(thr <= 1.0f);
}

TEST_CASE("uniform noise scores IoU near the ground-truth prevalence") {
    // GT covers 20% of pixels; with independent scores the best achievable
    // IoU settles near that prevalence
    double acc = 0.0;
    const int n_seeds = 10;
    for (uint64_t seed = 0; seed < n_seeds; ++seed) {
        SegmentationMask gt(64, 64);
        Rng rng(9000 + seed);
        for (size_t i = 0; i < gt.pixels.size(); ++i) gt.pixels[i] = rng.uniform() < 0.2 ? 1 : 0;
        const Plane p = testutil::random_plane(64, 64, 100 + seed);
        acc += best_threshold_iou(p, gt).second;
    }
    acc /= n_seeds;
    CHECK(acc > 0.15);
    CHECK(acc < 0.25);
}

TEST_CASE("returned IoU is exactly the IoU of the returned threshold's mask") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const Plane p = testutil::random_plane(48, 48, 40 + seed);
        SegmentationMask gt(48, 48);
        Rng rng(seed);
        for (size_t i = 0; i < gt.pixels.size(); ++i) gt.pixels[i] = rng.uniform() < 0.3 ? 1 : 0;
        const auto [thr, best] = best_threshold_iou(p, gt);
        CHECK(iou(threshold_mask(p, thr), gt) == best);
    }
}

TEST_CASE("constant plane returns its value and the degenerate all-true IoU") {
    Plane p(32, 32, 5.0f);
    SegmentationMask gt(32, 32);
    for (int i = 0; i < 100; ++i) gt.pixels[i] = 1;
    const auto [thr, best] = best_threshold_iou(p, gt);
    CHECK(thr == 5.0f);
    CHECK(best == doctest::Approx(100.0 / (32.0 * 32.0)));
}

TEST_CASE("best threshold is invariant under strictly monotone transforms") {
    const Plane p = testutil::random_plane(48, 48, 77, 1.0f, 10.0f);
    SegmentationMask gt(48, 48);
    Rng rng(4);
    for (size_t i = 0; i < gt.pixels.size(); ++i) gt.pixels[i] = rng.uniform() < 0.25 ? 1 : 0;
    const auto [thr_a, iou_a] = best_threshold_iou(p, gt);

    Plane q = p;
    for (float& v : q.pixels) v = std::exp(0.3f * v) + 2.0f;  // strictly increasing
    const auto [thr_b, iou_b] = best_threshold_iou(q, gt);

    // same optimal mask family: IoU agrees within one grid step's effect
    CHECK(std::fabs(iou_a - iou_b) < 0.02);
}

TEST_CASE("iteration sweep ties break toward raw and report full distributions") {
    Volume v;
    for (int z = 0; z < 3; ++z) {
        Plane p = testutil::random_plane(32, 32, 300 + z, 0.0f, 5.0f);
        p.depth_index = z;
        v.planes.push_back(p);
    }
    std::vector<SegmentationMask> gts;
    Rng rng(12);
    for (int z = 0; z < 3; ++z) {
        SegmentationMask gt(32, 32);
        for (size_t i = 0; i < gt.pixels.size(); ++i) gt.pixels[i] = rng.uniform() < 0.3 ? 1 : 0;
        gts.push_back(std::move(gt));
    }
    // identical volumes for every k: all means equal, tie-break selects k=0
    const SweepResult result = iteration_sweep({v, v, v, v}, gts);
    REQUIRE(result.per_k.size() == 4);
    CHECK(result.selected_k == 0);
    for (const auto& entry : result.per_k) {
        CHECK(entry.mean_best_iou == result.per_k[0].mean_best_iou);
        CHECK(entry.iou_distribution.size() == 3);
    }

    SUBCASE("single-plane input gives length-1 distributions") {
        Volume single;
        single.planes.push_back(v.planes[0]);
        single.planes.back().depth_index = 0;
        const SweepResult r2 = iteration_sweep({single, single}, {gts[0]});
        CHECK(r2.per_k[0].iou_distribution.size() == 1);
        CHECK(r2.per_k[1].iou_distribution.size() == 1);
    }
}

TEST_CASE("sweep selects the k with the best mean IoU deterministically") {
    // craft volumes where k=1 separates the GT best
    SegmentationMask gt(32, 32);
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x) gt.set(y, x, true);

    auto make_vol = [&](double separation, uint64_t seed) {
        Volume v;
        Plane p(32, 32, 0.0f);
        Rng rng(seed);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                p.at(y, x) = static_cast<float>((gt.at(y, x) ? separation : 0.0) + rng.uniform());
        v.planes.push_back(p);
        return v;
    };
    const SweepResult r =
        iteration_sweep({make_vol(0.5, 1), make_vol(5.0, 2), make_vol(0.2, 3)}, {gt});
    CHECK(r.selected_k == 1);
}
