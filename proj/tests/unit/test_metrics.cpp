#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "deepcontrast/degrade.hpp"
#include "deepcontrast/metrics.hpp"
#include "test_helpers.hpp"

using namespace deepcontrast;

TEST_CASE("single-level Haar of a 2x2 block matches the closed form") {
    Plane p(2, 2);
    const float a = 3.0f, b = 5.0f, c = 7.0f, d = 11.0f;
    p.at(0, 0) = a;
    p.at(0, 1) = b;
    p.at(1, 0) = c;
    p.at(1, 1) = d;
    const WaveletDecomposition w = haar_dwt2(p, 1);
    REQUIRE(w.levels.size() == 1);
    CHECK(w.approx[0] == doctest::Approx((a + b + c + d) / 2.0));
    CHECK(w.levels[0].horizontal[0] == doctest::Approx((a - b + c - d) / 2.0));
    CHECK(w.levels[0].vertical[0] == doctest::Approx((a + b - c - d) / 2.0));
    CHECK(w.levels[0].diagonal[0] == doctest::Approx((a - b - c + d) / 2.0));
}

TEST_CASE("Haar details of a constant plane are exactly zero") {
    Plane p(32, 32, 6.5f);
    const WaveletDecomposition w = haar_dwt2(p, 3);
    for (const auto& band : w.levels) {
        for (double v : band.horizontal) CHECK(v == 0.0);
        for (double v : band.vertical) CHECK(v == 0.0);
        for (double v : band.diagonal) CHECK(v == 0.0);
    }
}

TEST_CASE("Haar transform reconstructs perfectly and conserves energy") {
    for (uint64_t seed : {1ull, 2ull}) {
        const Plane p = testutil::random_plane(128, 128, seed, -4.0f, 9.0f);
        const WaveletDecomposition w = haar_dwt2(p, 4);
        CHECK(w.pad_bottom == 0);
        CHECK(w.pad_right == 0);

        const std::vector<double> back = haar_idwt2(w);
        double max_err = 0.0;
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x)
                max_err = std::max(max_err, std::fabs(back[y * 128 + x] - p.at(y, x)));
        CHECK(max_err < 1e-6);

        double pixel_energy = 0.0, coeff_energy = 0.0;
        for (float v : p.pixels) pixel_energy += static_cast<double>(v) * v;
        for (const auto& band : w.levels) {
            for (double v : band.horizontal) coeff_energy += v * v;
            for (double v : band.vertical) coeff_energy += v * v;
            for (double v : band.diagonal) coeff_energy += v * v;
        }
        for (double v : w.approx) coeff_energy += v * v;
        CHECK(coeff_energy == doctest::Approx(pixel_energy).epsilon(1e-6));
    }
}

TEST_CASE("Haar pads non-divisible inputs by reflection and records the pad") {
    const Plane p = testutil::random_plane(50, 35, 4);
    const WaveletDecomposition w = haar_dwt2(p, 3);  // needs multiples of 8
    CHECK(w.pad_bottom == 6);
    CHECK(w.pad_right == 5);
    CHECK(w.input_height == 50);
    CHECK(w.input_width == 35);
    const std::vector<double> back = haar_idwt2(w);
    for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 35; ++x)
            CHECK(std::fabs(back[y * 40 + x] - p.at(y, x)) < 1e-6);
}

TEST_CASE("wci matches an independent brute-force recomputation") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const Plane p = testutil::random_plane(64, 64, 1000 + seed, 0.0f, 30.0f);
        const WaveletDecomposition w = haar_dwt2(p, 4);
        std::vector<double> pool;
        for (const auto& band : w.levels) {
            for (double v : band.horizontal) pool.push_back(std::fabs(v));
            for (double v : band.vertical) pool.push_back(std::fabs(v));
            for (double v : band.diagonal) pool.push_back(std::fabs(v));
        }
        const double expected = std::log(testutil::percentile_oracle(pool, 95.0) /
                                         testutil::percentile_oracle(pool, 50.0));
        CHECK(wci(p) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("wci of a constant plane raises the degenerate-contrast error") {
    Plane p(64, 64, 2.0f);
    CHECK_THROWS_WITH_AS(wci(p), doctest::Contains("degenerate contrast"), std::runtime_error);
}

TEST_CASE("wci of a flat coefficient distribution is ln(1) = 0") {
    // build the plane by inverting a decomposition whose detail magnitudes
    // are all exactly 1
    Plane seed_plane(32, 32, 0.0f);
    WaveletDecomposition w = haar_dwt2(seed_plane, 4);
    Rng rng(5);
    for (auto& band : w.levels) {
        for (double& v : band.horizontal) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (double& v : band.vertical) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (double& v : band.diagonal) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    for (double& v : w.approx) v = 100.0;
    const std::vector<double> img = haar_idwt2(w);
    Plane p(32, 32);
    for (size_t i = 0; i < p.pixels.size(); ++i) p.pixels[i] = static_cast<float>(img[i]);
    CHECK(std::fabs(wci(p)) < 1e-4);
}

TEST_CASE("pci hits the constructed rank statistics") {
    SUBCASE("constant positive plane gives 0") {
        Plane p(16, 16, 5.0f);
        CHECK(pci(p) == doctest::Approx(0.0));
    }
    SUBCASE("median 10 and P95 100 give ln(10)") {
        // 21 ascending values: rank 10 (median) = 10, rank 19 (p95) = 100
        Plane p(3, 7);
        const float values[21] = {1, 2, 3, 4,  5,  6,  7,  8,  9,   10, 10,
                                  11, 12, 13, 14, 15, 16, 17, 18, 100, 120};
        for (int i = 0; i < 21; ++i) p.pixels[i] = values[i];
        REQUIRE(percentile(p.values(), 50.0) == doctest::Approx(10.0));
        REQUIRE(percentile(p.values(), 95.0) == doctest::Approx(100.0));
        CHECK(pci(p) == doctest::Approx(std::log(10.0)).epsilon(1e-9));
    }
    SUBCASE("scaling invariance") {
        const Plane p = testutil::random_plane(32, 32, 8, 1.0f, 50.0f);
        const double base = pci(p);
        // dyadic factors scale float pixels exactly; the metric must agree
        // to 1e-9 there, and to float-rounding accuracy everywhere else
        for (float scale : {0.25f, 2.0f, 1024.0f}) {
            Plane q = p;
            for (float& v : q.pixels) v *= scale;
            CHECK(pci(q) == doctest::Approx(base).epsilon(1e-9));
        }
        Plane q = p;
        for (float& v : q.pixels) v *= 3.0f;
        CHECK(pci(q) == doctest::Approx(base).epsilon(1e-6));
    }
    SUBCASE("non-positive median errors") {
        Plane p(16, 16, 0.0f);
        for (int i = 0; i < 50; ++i) p.pixels[i] = 5.0f;  // median stays 0
        CHECK_THROWS_WITH_AS(pci(p), doctest::Contains("background floor"), std::runtime_error);
    }
    SUBCASE("adding a positive constant strictly decreases pci") {
        const Plane p = testutil::random_plane(32, 32, 12, 1.0f, 40.0f);
        double prev = pci(p);
        for (float offset : {5.0f, 20.0f, 100.0f}) {
            Plane q = p;
            for (float& v : q.pixels) v += offset;
            const double cur = pci(q);
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("ssim basics: identity, symmetry, shape checks") {
    const Plane a = testutil::random_plane(32, 32, 3, 0.0f, 10.0f);
    const Plane b = testutil::random_plane(32, 32, 4, 0.0f, 10.0f);
    CHECK(ssim(a, a) == 1.0);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-9));
    Plane c(32, 16, 1.0f);
    CHECK_THROWS(ssim(a, c));
}

TEST_CASE("ssim strictly decreases with noise power") {
    // averaged over 10 seeds per noise level
    const Plane base = gaussian_blur(testutil::random_plane(64, 64, 77, 0.0f, 100.0f), 2.0f);
    float mn = base.pixels[0], mx = base.pixels[0];
    for (float v : base.pixels) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double range = mx - mn;
    double prev = 1.0;
    int level = 0;
    for (double rel_sigma : {0.01, 0.05, 0.1}) {
        double acc = 0.0;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(900 + seed + 100 * level);
            Plane noisy = base;
            for (float& v : noisy.pixels)
                v += static_cast<float>(rel_sigma * range * rng.normal());
            acc += ssim(base, noisy, range);
        }
        acc /= 10.0;
        CHECK(acc < prev);
        prev = acc;
        ++level;
    }
}

TEST_CASE("iou covers the stated cases") {
    SegmentationMask a(16, 16), b(16, 16);
    SUBCASE("both empty -> 1.0") { CHECK(iou(a, b) == 1.0); }
    SUBCASE("identical non-empty -> 1.0") {
        for (int i = 0; i < 40; ++i) {
            a.pixels[i] = 1;
            b.pixels[i] = 1;
        }
        CHECK(iou(a, b) == 1.0);
    }
    SUBCASE("disjoint non-empty -> 0.0") {
        a.pixels[0] = 1;
        b.pixels[200] = 1;
        CHECK(iou(a, b) == 0.0);
    }
    SUBCASE("half-overlapping equal areas -> 1/3") {
        // a covers columns 0..7, b covers columns 4..11 on every row
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 8; ++x) {
                a.set(y, x, true);
                b.set(y, x + 4, true);
            }
        CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("shape mismatch") {
        SegmentationMask c(8, 8);
        CHECK_THROWS(iou(a, c));
    }
}

TEST_CASE("aggregate_report computes t-based confidence intervals") {
    SUBCASE("identical values give zero-width CI") {
        std::vector<MetricsRow> rows;
        for (int i = 0; i < 4; ++i) rows.push_back({"raw", 0, 2.0, 3.0, {}, {}});
        const auto stats = aggregate_report(rows);
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].wci_ci95 == doctest::Approx(0.0));
        CHECK(stats[0].n == 4);
    }
    SUBCASE("group {1,2,3} has mean 2 and half-width t(0.975,2)/sqrt(3)") {
        std::vector<MetricsRow> rows;
        for (double v : {1.0, 2.0, 3.0}) rows.push_back({"raw", 0, v, v, {}, {}});
        const auto stats = aggregate_report(rows);
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].wci_mean == doctest::Approx(2.0));
        // frozen from an independent oracle: t_{0.975,2} = 4.302652729,
        // sd = 1, n = 3 -> 4.302652729 / sqrt(3) = 2.484138
        CHECK(stats[0].wci_ci95 == doctest::Approx(2.4841377).epsilon(1e-6));
    }
    SUBCASE("row count equals the number of distinct (depth, variant) pairs") {
        std::vector<MetricsRow> rows;
        for (int d = 0; d < 3; ++d)
            for (const char* variant : {"raw", "enhanced"})
                for (int rep = 0; rep < 2; ++rep)
                    rows.push_back({variant, d, 1.0 + rep, 2.0, {}, {}});
        CHECK(aggregate_report(rows).size() == 6);
    }
    SUBCASE("empty input errors") { CHECK_THROWS(aggregate_report({})); }
    SUBCASE("t critical value matches tables") {
        CHECK(t_critical_975(2) == doctest::Approx(4.302652729).epsilon(1e-8));
        CHECK(t_critical_975(10) == doctest::Approx(2.228138852).epsilon(1e-8));
    }
}

TEST_CASE("wci and pci are invariant under positive scaling") {
    const Plane p = testutil::random_plane(64, 64, 15, 0.5f, 20.0f);
    const double w0 = wci(p), p0 = pci(p);
    Plane q = p;
    for (float& v : q.pixels) v *= 8.0f;  // exact in float
    CHECK(wci(q) == doctest::Approx(w0).epsilon(1e-9));
    CHECK(pci(q) == doctest::Approx(p0).epsilon(1e-9));
    Plane r = p;
    for (float& v : r.pixels) v *= 7.0f;
    CHECK(wci(r) == doctest::Approx(w0).epsilon(1e-6));
    CHECK(pci(r) == doctest::Approx(p0).epsilon(1e-6));
}

TEST_CASE("report CSV has the documented schema") {
    std::vector<MetricsRow> rows;
    MetricsRow r{"raw", 3, 1.5, 0.5, {}, {}};
    rows.push_back(r);
    rows.push_back(r);
    const std::string csv = report_to_csv(aggregate_report(rows));
    CHECK(csv.find("variant,depth_index,n,wci_mean,wci_ci95,pci_mean,pci_ci95,"
                   "ssim_mean,ssim_ci95,iou_mean,iou_ci95") == 0);
    CHECK(csv.find("raw,3,2,") != std::string::npos);
}
