#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deepcontrast {

/// Single focal plane. Pixels are row-major, height*width, 32-bit float.
/// Raw-provenance planes are expected to be non-negative; derived planes
/// (normalized, network outputs) may carry any finite value.
struct Plane {
    int height = 0;
    int width = 0;
    int depth_index = 0;
    float voxel_size_um = 0.3f;
    std::vector<float> pixels;

    Plane() = default;
    Plane(int h, int w, float fill = 0.0f, int z = 0)
        : height(h), width(w), depth_index(z),
          pixels(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {}

    float& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
    std::span<const float> values() const { return pixels; }
};

/// Ordered stack of planes. depth_index values are 0..N-1 contiguous.
struct Volume {
    std::vector<Plane> planes;
    float depth_step_um = 0.3f;

    int n_slices() const { return static_cast<int>(planes.size()); }
    int height() const { return planes.empty() ? 0 : planes.front().height; }
    int width() const { return planes.empty() ? 0 : planes.front().width; }
};

struct NormalizationParams {
    float lo = 0.0f;          // value mapped to 0
    float hi = 1.0f;          // value mapped to 1
    float lo_percentile = 2.0f;
    float hi_percentile = 99.8f;
};

inline constexpr float kDefaultLoPercentile = 2.0f;
inline constexpr float kDefaultHiPercentile = 99.8f;

/// Throws std::invalid_argument if the plane violates container invariants
/// (dims < 16, NaN/Inf). `require_nonnegative` additionally rejects
/// negative pixels (raw provenance).
void validate_plane(const Plane& p, bool require_nonnegative = false);

/// Throws if planes disagree in shape or depth_index is not 0..N-1 contiguous.
void validate_volume(const Volume& v, bool require_nonnegative = false);

/// Linear-interpolation percentile over sorted values, p in [0, 100].
/// p=50 is the median. Throws on empty input.
double percentile(std::span<const float> values, double p);
double percentile(std::span<const double> values, double p);

/// Percentile normalization: (pixels - lo) / (hi - lo) with lo/hi the given
/// percentiles of the input. No clipping; values outside [0,1] are allowed.
/// Throws if the two percentiles coincide (constant plane).
Plane normalize(const Plane& p, NormalizationParams& params_out,
                float lo_pct = kDefaultLoPercentile,
                float hi_pct = kDefaultHiPercentile);

/// Computes the normalization params of a plane without applying them.
NormalizationParams normalization_params(const Plane& p,
                                         float lo_pct = kDefaultLoPercentile,
                                         float hi_pct = kDefaultHiPercentile);

/// Applies precomputed params: (pixels - lo) / (hi - lo).
Plane normalize_with(const Plane& p, const NormalizationParams& params);

/// Inverse of normalize: pixels * (hi - lo) + lo.
Plane denormalize(const Plane& p, const NormalizationParams& params);

/// FNV-1a 64-bit over raw bytes; used for dataset/input provenance hashes.
uint64_t fnv1a64(const void* data, size_t n_bytes, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t hash_volume(const Volume& v);

}  // namespace deepcontrast
