#include "deepcontrast/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace deepcontrast {

void validate_plane(const Plane& p, bool require_nonnegative) {
    if (p.height < 16 || p.width < 16)
        throw std::invalid_argument("plane too small: need height and width >= 16, got " +
                                    std::to_string(p.height) + "x" + std::to_string(p.width));
    if (p.pixels.size() != static_cast<size_t>(p.height) * static_cast<size_t>(p.width))
        throw std::invalid_argument("pixel buffer size does not match plane dimensions");
    for (float v : p.pixels) {
        if (!std::isfinite(v))
            throw std::invalid_argument("plane contains NaN or Inf");
        if (require_nonnegative && v < 0.0f)
            throw std::invalid_argument("raw plane contains negative pixels");
    }
}

void validate_volume(const Volume& v, bool require_nonnegative) {
    if (v.planes.empty())
        throw std::invalid_argument("volume has no planes");
    const int h = v.planes.front().height;
    const int w = v.planes.front().width;
    for (size_t i = 0; i < v.planes.size(); ++i) {
        const Plane& p = v.planes[i];
        if (p.height != h || p.width != w)
            throw std::invalid_argument("volume planes disagree in shape");
        if (p.depth_index != static_cast<int>(i))
            throw std::invalid_argument("volume depth_index values must be 0..N-1 contiguous");
        validate_plane(p, require_nonnegative);
    }
}

namespace {

template <typename T>
double percentile_impl(std::span<const T> values, double p) {
    if (values.empty())
        throw std::invalid_argument("percentile of empty input");
    if (p < 0.0 || p > 100.0)
        throw std::invalid_argument("percentile p must be in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double percentile(std::span<const float> values, double p) { return percentile_impl(values, p); }
double percentile(std::span<const double> values, double p) { return percentile_impl(values, p); }

NormalizationParams normalization_params(const Plane& p, float lo_pct, float hi_pct) {
    if (!(hi_pct > lo_pct) || lo_pct < 0.0f || hi_pct > 100.0f)
        throw std::invalid_argument("need 0 <= lo_percentile < hi_percentile <= 100");
    NormalizationParams params;
    params.lo_percentile = lo_pct;
    params.hi_percentile = hi_pct;
    params.lo = static_cast<float>(percentile(p.values(), lo_pct));
    params.hi = static_cast<float>(percentile(p.values(), hi_pct));
    if (!(params.hi > params.lo))
        throw std::invalid_argument("cannot normalize: percentile range is empty (constant plane)");
    return params;
}

Plane normalize_with(const Plane& p, const NormalizationParams& params) {
    Plane out = p;
    const float scale = 1.0f / (params.hi - params.lo);
    for (float& v : out.pixels) v = (v - params.lo) * scale;
    return out;
}

Plane normalize(const Plane& p, NormalizationParams& params_out, float lo_pct, float hi_pct) {
    params_out = normalization_params(p, lo_pct, hi_pct);
    return normalize_with(p, params_out);
}

Plane denormalize(const Plane& p, const NormalizationParams& params) {
    Plane out = p;
    const float range = params.hi - params.lo;
    for (float& v : out.pixels) v = v * range + params.lo;
    return out;
}

uint64_t fnv1a64(const void* data, size_t n_bytes, uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n_bytes; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t hash_volume(const Volume& v) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Plane& p : v.planes) {
        const int meta[3] = {p.height, p.width, p.depth_index};
        h = fnv1a64(meta, sizeof(meta), h);
        h = fnv1a64(p.pixels.data(), p.pixels.size() * sizeof(float), h);
    }
    return h;
}

}  // namespace deepcontrast
