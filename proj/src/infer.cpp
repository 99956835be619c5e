#include "deepcontrast/infer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deepcontrast {

void InferenceConfig::validate() const {
    if (iterations < 1 || iterations > 16)
        throw std::invalid_argument("iterations must be in [1, 16]");
    if (tile_size < 1) throw std::invalid_argument("tile_size must be >= 1");
    if (tile_overlap < 0 || tile_overlap >= tile_size / 2)
        throw std::invalid_argument("tile_overlap must be < tile_size / 2");
    if (!(clip_floor >= 0.0f)) throw std::invalid_argument("clip_floor must be >= 0");
}

Plane PixelwiseModel::apply(const Plane& normalized) const {
    Plane out = normalized;
    for (float& v : out.pixels) v = fn_(v);
    return out;
}

Plane NetworkPlaneModel::apply(const Plane& normalized) const {
    Tensor4<float> x(1, 1, normalized.height, normalized.width);
    std::copy(normalized.pixels.begin(), normalized.pixels.end(), x.data.begin());
    const Tensor4<float> y = net_.forward(x);
    Plane out = normalized;
    std::copy(y.data.begin(), y.data.end(), out.pixels.begin());
    return out;
}

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

// Runs the model on a crop, reflect-padding it up to the model's size
// multiple and cropping the result back.
Plane run_padded(const PlaneModel& model, const Plane& crop) {
    const int mult = model.size_multiple();
    const int ph = (crop.height + mult - 1) / mult * mult;
    const int pw = (crop.width + mult - 1) / mult * mult;
    if (ph == crop.height && pw == crop.width) return model.apply(crop);
    Plane padded(ph, pw);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            padded.at(y, x) = crop.at(reflect_index(y, crop.height), reflect_index(x, crop.width));
    Plane result = model.apply(padded);
    Plane out = crop;
    for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x) out.at(y, x) = result.at(y, x);
    return out;
}

std::vector<int> tile_starts(int extent, int tile, int overlap) {
    std::vector<int> starts;
    if (extent <= tile) {
        starts.push_back(0);
        return starts;
    }
    const int stride = tile - overlap;
    for (int s = 0;; s += stride) {
        if (s + tile >= extent) {
            starts.push_back(extent - tile);
            break;
        }
        starts.push_back(s);
    }
    return starts;
}

// 1D feathering profile for a tile: linear ramps over `overlap` px at edges
// that touch a neighboring tile, flat 1 elsewhere. Adjacent ramp pairs sum
// to 1; the accumulated weight image normalizes any remaining over-coverage.
std::vector<float> feather_profile(int len, int overlap, bool ramp_lead, bool ramp_trail) {
    std::vector<float> w(len, 1.0f);
    const int ov = std::min(overlap, len);
    if (ramp_lead)
        for (int i = 0; i < ov; ++i)
            w[i] = std::min(w[i], static_cast<float>(i + 1) / static_cast<float>(ov + 1));
    if (ramp_trail)
        for (int i = 0; i < ov; ++i)
            w[len - 1 - i] =
                std::min(w[len - 1 - i], static_cast<float>(i + 1) / static_cast<float>(ov + 1));
    return w;
}

Plane enhance_normalized(const PlaneModel& model, const Plane& p, const InferenceConfig& cfg) {
    const int mult = model.size_multiple();
    if (p.height < mult || p.width < mult)
        throw std::invalid_argument("plane smaller than the model's minimum size");
    if (p.height <= cfg.tile_size && p.width <= cfg.tile_size) return run_padded(model, p);
    return detail::enhance_normalized_tiled(model, p, cfg);
}

}  // namespace

namespace detail {

Plane enhance_normalized_tiled(const PlaneModel& model, const Plane& p,
                               const InferenceConfig& cfg) {
    const std::vector<int> ys = tile_starts(p.height, std::min(cfg.tile_size, p.height),
                                            cfg.tile_overlap);
    const std::vector<int> xs = tile_starts(p.width, std::min(cfg.tile_size, p.width),
                                            cfg.tile_overlap);
    const int th = std::min(cfg.tile_size, p.height);
    const int tw = std::min(cfg.tile_size, p.width);

    std::vector<double> acc(p.size(), 0.0);
    std::vector<double> wsum(p.size(), 0.0);
    for (size_t yi = 0; yi < ys.size(); ++yi) {
        for (size_t xi = 0; xi < xs.size(); ++xi) {
            const int y0 = ys[yi], x0 = xs[xi];
            Plane crop(th, tw);
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x) crop.at(y, x) = p.at(y0 + y, x0 + x);
            const Plane out = run_padded(model, crop);
            const std::vector<float> wy =
                feather_profile(th, cfg.tile_overlap, yi > 0, yi + 1 < ys.size());
            const std::vector<float> wx =
                feather_profile(tw, cfg.tile_overlap, xi > 0, xi + 1 < xs.size());
            for (int y = 0; y < th; ++y) {
                for (int x = 0; x < tw; ++x) {
                    const double w = static_cast<double>(wy[y]) * wx[x];
                    const size_t idx = static_cast<size_t>(y0 + y) * p.width + (x0 + x);
                    acc[idx] += w * out.at(y, x);
                    wsum[idx] += w;
                }
            }
        }
    }
    Plane result = p;
    for (size_t i = 0; i < result.pixels.size(); ++i)
        result.pixels[i] = static_cast<float>(acc[i] / wsum[i]);
    return result;
}

}  // namespace detail

Plane enhance_plane(const PlaneModel& model, const Plane& p, const InferenceConfig& cfg) {
    cfg.validate();
    NormalizationParams params;
    const Plane normalized = normalize(p, params);
    Plane out = enhance_normalized(model, normalized, cfg);
    out = denormalize(out, params);
    const float floor = cfg.clip_floor * (params.hi - params.lo);
    for (float& v : out.pixels) {
        if (!std::isfinite(v)) throw std::runtime_error("inference produced NaN/Inf output");
        v = std::max(v, floor);
    }
    out.depth_index = p.depth_index;
    return out;
}

Volume enhance_volume(const PlaneModel& model, const Volume& v, const InferenceConfig& cfg) {
    Volume out = v;
    for (size_t z = 0; z < v.planes.size(); ++z)
        out.planes[z] = enhance_plane(model, v.planes[z], cfg);
    return out;
}

std::vector<Volume> enhance_iterative(const PlaneModel& model, const Volume& v,
                                      const InferenceConfig& cfg) {
    cfg.validate();
    std::vector<Volume> results;
    const Volume* cur = &v;
    for (int k = 0; k < cfg.iterations; ++k) {
        results.push_back(enhance_volume(model, *cur, cfg));
        cur = &results.back();
    }
    return results;
}

}  // namespace deepcontrast
