#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "deepcontrast/image.hpp"
#include "deepcontrast/tiff.hpp"
#include "test_helpers.hpp"

using namespace deepcontrast;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "dc_imgcore_tests";
    fs::create_directories(dir);
    return dir;
}

// minimal handcrafted little-endian TIFF for reader rejection cases
void write_crafted_tiff(const fs::path& path, uint16_t bits, uint16_t samples,
                        uint16_t sample_format, uint32_t width = 16, uint32_t height = 16) {
    std::vector<uint8_t> b;
    auto u16 = [&](uint16_t v) {
        b.push_back(v & 0xff);
        b.push_back(v >> 8);
    };
    auto u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
    };
    b.push_back('I');
    b.push_back('I');
    u16(42);
    u32(8);  // IFD right after header
    const uint32_t n_data = width * height * (bits / 8) * samples;
    u16(9);  // entries
    auto entry = [&](uint16_t tag, uint16_t type, uint32_t count, uint32_t value) {
        u16(tag);
        u16(type);
        u32(count);
        if (type == 3) {
            u16(static_cast<uint16_t>(value));
            u16(0);
        } else {
            u32(value);
        }
    };
    const uint32_t data_off = 8 + 2 + 9 * 12 + 4;
    entry(256, 4, 1, width);
    entry(257, 4, 1, height);
    entry(258, 3, 1, bits);
    entry(259, 3, 1, 1);
    entry(262, 3, 1, 1);
    entry(273, 4, 1, data_off);
    entry(277, 3, 1, samples);
    entry(279, 4, 1, n_data);
    entry(339, 3, 1, sample_format);
    u32(0);  // next IFD
    for (uint32_t i = 0; i < n_data; ++i) b.push_back(0);
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("percentile matches the stated examples") {
    const std::vector<float> v1 = {1, 2, 3, 4, 5};
    CHECK(percentile(std::span<const float>(v1), 50.0) == doctest::Approx(3.0).epsilon(1e-12));
    const std::vector<float> v2 = {0, 10};
    CHECK(percentile(std::span<const float>(v2), 95.0) == doctest::Approx(9.5).epsilon(1e-12));
    const std::vector<float> v3 = {7, 7, 7};
    for (double p : {0.0, 17.0, 50.0, 95.0, 100.0})
        CHECK(percentile(std::span<const float>(v3), p) == doctest::Approx(7.0));
    CHECK_THROWS(percentile(std::span<const float>(), 50.0));
}

TEST_CASE("percentile agrees with the brute-force oracle on random arrays") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 1 + rng.uniform_below(1000);
        std::vector<float> values(n);
        std::vector<double> as_double(n);
        for (size_t i = 0; i < n; ++i) {
            values[i] = static_cast<float>(rng.uniform() * 100.0 - 50.0);
            as_double[i] = values[i];
        }
        const double p = rng.uniform() * 100.0;
        const double expected = testutil::percentile_oracle(as_double, p);
        CHECK(percentile(std::span<const float>(values), p) ==
              doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("percentile is monotone in p") {
    Rng rng(7);
    std::vector<float> values(257);
    for (float& v : values) v = static_cast<float>(rng.uniform());
    for (int i = 0; i < 50; ++i) {
        double p1 = rng.uniform() * 100.0, p2 = rng.uniform() * 100.0;
        if (p1 > p2) std::swap(p1, p2);
        CHECK(percentile(std::span<const float>(values), p1) <=
              percentile(std::span<const float>(values), p2));
    }
}

TEST_CASE("normalize maps the chosen percentiles to 0 and 1") {
    Plane p = testutil::random_plane(32, 32, 5, 10.0f, 50.0f);
    NormalizationParams params;
    const Plane out = normalize(p, params, 0.0f, 100.0f);
    float mn = out.pixels[0], mx = out.pixels[0];
    for (float v : out.pixels) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    CHECK(mn == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("denormalize(normalize(p)) is the identity within 1e-5 relative") {
    Plane p = testutil::random_plane(48, 40, 11, 5.0f, 500.0f);
    NormalizationParams params;
    const Plane back = denormalize(normalize(p, params), params);
    for (size_t i = 0; i < p.pixels.size(); ++i)
        CHECK(back.pixels[i] == doctest::Approx(p.pixels[i]).epsilon(1e-5));
}

TEST_CASE("normalize rejects a constant plane") {
    Plane p(16, 16, 3.5f);
    NormalizationParams params;
    CHECK_THROWS(normalize(p, params));
}

TEST_CASE("denormalize of constant planes hits the stated endpoints") {
    NormalizationParams params;
    params.lo = 5.0f;
    params.hi = 9.0f;
    Plane zeros(16, 16, 0.0f), ones(16, 16, 1.0f);
    const Plane a = denormalize(zeros, params), b = denormalize(ones, params);
    for (float v : a.pixels) CHECK(v == doctest::Approx(5.0f));
    for (float v : b.pixels) CHECK(v == doctest::Approx(9.0f));
}

TEST_CASE("float32 TIFF volumes round-trip bit-exactly with depth order preserved") {
    Volume v;
    for (int z = 0; z < 3; ++z) {
        Plane p = testutil::random_plane(64, 64, 100 + z, -3.0f, 70000.0f);
        p.depth_index = z;
        v.planes.push_back(p);
    }
    const fs::path path = temp_dir() / "roundtrip.tif";
    write_volume(v, path.string(), TiffDType::Float32);
    const Volume back = read_volume(path.string());
    REQUIRE(back.n_slices() == 3);
    for (int z = 0; z < 3; ++z) {
        CHECK(back.planes[z].depth_index == z);
        CHECK(testutil::bit_identical(back.planes[z], v.planes[z]));
    }
}

TEST_CASE("uint16 TIFF writing clips and rounds") {
    Volume v;
    Plane p(16, 16, 100.0f);
    p.at(0, 0) = -3.0f;
    p.at(0, 1) = 70000.0f;
    p.at(0, 2) = 41.7f;
    v.planes.push_back(p);
    const fs::path path = temp_dir() / "u16.tif";
    write_volume(v, path.string(), TiffDType::Uint16);
    const Volume back = read_volume(path.string());
    CHECK(back.planes[0].at(0, 0) == 0.0f);
    CHECK(back.planes[0].at(0, 1) == 65535.0f);
    CHECK(back.planes[0].at(0, 2) == 42.0f);
}

TEST_CASE("16-bit multi-page TIFF reads with contiguous depth indices") {
    Volume v;
    for (int z = 0; z < 3; ++z) {
        Plane p(64, 64, static_cast<float>(z * 100), z);
        v.planes.push_back(p);
    }
    const fs::path path = temp_dir() / "u16_stack.tif";
    write_volume(v, path.string(), TiffDType::Uint16);
    const Volume back = read_volume(path.string());
    REQUIRE(back.n_slices() == 3);
    for (int z = 0; z < 3; ++z) {
        CHECK(back.planes[z].depth_index == z);
        CHECK(back.planes[z].at(5, 5) == doctest::Approx(z * 100.0f));
    }

    Volume single;
    single.planes.push_back(Plane(32, 32, 7.0f));
    const fs::path spath = temp_dir() / "single.tif";
    write_volume(single, spath.string(), TiffDType::Uint16);
    CHECK(read_volume(spath.string()).n_slices() == 1);
}

TEST_CASE("reader rejects RGB, unsupported depths, and missing files") {
    const fs::path rgb = temp_dir() / "rgb.tif";
    write_crafted_tiff(rgb, 8, 3, 1);
    CHECK_THROWS_WITH_AS(read_volume(rgb.string()),
                         doctest::Contains("unsupported channel count"), std::runtime_error);

    const fs::path u32 = temp_dir() / "u32.tif";
    write_crafted_tiff(u32, 32, 1, 1);  // 32-bit unsigned int, not float
    CHECK_THROWS_WITH_AS(read_volume(u32.string()), doctest::Contains("unsupported bit depth"),
                         std::runtime_error);

    CHECK_THROWS(read_volume((temp_dir() / "does_not_exist.tif").string()));
}

TEST_CASE("volume validation catches shape and index violations") {
    Volume v;
    v.planes.push_back(Plane(32, 32, 1.0f, 0));
    v.planes.push_back(Plane(32, 16, 1.0f, 1));
    CHECK_THROWS(validate_volume(v));

    Volume v2;
    v2.planes.push_back(Plane(32, 32, 1.0f, 0));
    v2.planes.push_back(Plane(32, 32, 1.0f, 5));
    CHECK_THROWS(validate_volume(v2));

    Plane nan_plane(16, 16, 1.0f);
    nan_plane.at(3, 3) = std::nanf("");
    CHECK_THROWS(validate_plane(nan_plane));
    Plane small(8, 8, 1.0f);
    CHECK_THROWS(validate_plane(small));
}
