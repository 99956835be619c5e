#include "deepcontrast/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace deepcontrast {

namespace {

struct Range {
    float lo = 0.0f, hi = 0.0f;
    float span() const { return hi - lo; }
};

Range plane_range(const Plane& p) {
    Range r{p.pixels[0], p.pixels[0]};
    for (float v : p.pixels) {
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    }
    return r;
}

int bin_of(float v, const Range& r, int bins) {
    const float t = (v - r.lo) / r.span();
    return std::clamp(static_cast<int>(t * bins), 0, bins - 1);
}

// Histogram -> CDF mapping of bin index to [0, 1], after clipping counts at
// `clip` and redistributing the excess uniformly (remainder spread from bin 0).
std::vector<double> clipped_cdf(std::vector<double> hist, double clip) {
    double excess = 0.0;
    for (double& h : hist) {
        if (h > clip) {
            excess += h - clip;
            h = clip;
        }
    }
    const double bump = excess / hist.size();
    for (double& h : hist) h += bump;

    double total = 0.0;
    for (double h : hist) total += h;
    std::vector<double> cdf(hist.size());
    double acc = 0.0;
    for (size_t i = 0; i < hist.size(); ++i) {
        acc += hist[i];
        cdf[i] = acc / total;
    }
    return cdf;
}

}  // namespace

Plane global_histogram_equalize(const Plane& p, int bins) {
    const Range r = plane_range(p);
    if (!(r.span() > 0.0f)) return p;  // single-level histogram: identity
    std::vector<double> hist(bins, 0.0);
    for (float v : p.pixels) hist[bin_of(v, r, bins)] += 1.0;
    const std::vector<double> cdf = clipped_cdf(std::move(hist), 1e300);
    Plane out = p;
    for (float& v : out.pixels)
        v = r.lo + r.span() * static_cast<float>(cdf[bin_of(v, r, bins)]);
    return out;
}

Plane clahe(const Plane& p, int tile, float clip_limit, int bins) {
    if (tile < 1) throw std::invalid_argument("tile count must be >= 1");
    if (!(clip_limit > 0.0f)) throw std::invalid_argument("clip_limit must be > 0");
    if (bins < 2) throw std::invalid_argument("bins must be >= 2");
    if (p.height < tile || p.width < tile)
        throw std::invalid_argument("plane smaller than the tile grid");

    const Range r = plane_range(p);
    if (!(r.span() > 0.0f)) return p;

    const int th = tile, tw = tile;  // grid is tile x tile
    auto tile_y0 = [&](int ty) { return ty * p.height / th; };
    auto tile_x0 = [&](int tx) { return tx * p.width / tw; };

    // per-tile CDF mappings
    std::vector<std::vector<double>> cdfs(static_cast<size_t>(th) * tw);
    for (int ty = 0; ty < th; ++ty) {
        for (int tx = 0; tx < tw; ++tx) {
            std::vector<double> hist(bins, 0.0);
            const int y0 = tile_y0(ty), y1 = tile_y0(ty + 1);
            const int x0 = tile_x0(tx), x1 = tile_x0(tx + 1);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) hist[bin_of(p.at(y, x), r, bins)] += 1.0;
            const double n_tile_px = static_cast<double>(y1 - y0) * (x1 - x0);
            const double clip = std::max(1.0, static_cast<double>(clip_limit) * n_tile_px / bins);
            cdfs[static_cast<size_t>(ty) * tw + tx] = clipped_cdf(std::move(hist), clip);
        }
    }

    auto tile_center_y = [&](int ty) { return 0.5 * (tile_y0(ty) + tile_y0(ty + 1)); };
    auto tile_center_x = [&](int tx) { return 0.5 * (tile_x0(tx) + tile_x0(tx + 1)); };

    Plane out = p;
    for (int y = 0; y < p.height; ++y) {
        // vertical tile pair and interpolation weight
        int ty0 = 0;
        while (ty0 + 1 < th && tile_center_y(ty0 + 1) <= y) ++ty0;
        int ty1 = ty0;
        double wy = 0.0;
        if (y >= tile_center_y(ty0) && ty0 + 1 < th) {
            ty1 = ty0 + 1;
            wy = (y - tile_center_y(ty0)) / (tile_center_y(ty1) - tile_center_y(ty0));
        } else if (y < tile_center_y(ty0) && ty0 > 0) {
            ty1 = ty0;
            ty0 = ty0 - 1;
            wy = (y - tile_center_y(ty0)) / (tile_center_y(ty1) - tile_center_y(ty0));
        }
        for (int x = 0; x < p.width; ++x) {
            int tx0 = 0;
            while (tx0 + 1 < tw && tile_center_x(tx0 + 1) <= x) ++tx0;
            int tx1 = tx0;
            double wx = 0.0;
            if (x >= tile_center_x(tx0) && tx0 + 1 < tw) {
                tx1 = tx0 + 1;
                wx = (x - tile_center_x(tx0)) / (tile_center_x(tx1) - tile_center_x(tx0));
            } else if (x < tile_center_x(tx0) && tx0 > 0) {
                tx1 = tx0;
                tx0 = tx0 - 1;
                wx = (x - tile_center_x(tx0)) / (tile_center_x(tx1) - tile_center_x(tx0));
            }
            const int bin = bin_of(p.at(y, x), r, bins);
            const double m00 = cdfs[static_cast<size_t>(ty0) * tw + tx0][bin];
            const double m01 = cdfs[static_cast<size_t>(ty0) * tw + tx1][bin];
            const double m10 = cdfs[static_cast<size_t>(ty1) * tw + tx0][bin];
            const double m11 = cdfs[static_cast<size_t>(ty1) * tw + tx1][bin];
            const double m = (1.0 - wy) * ((1.0 - wx) * m00 + wx * m01) +
                             wy * ((1.0 - wx) * m10 + wx * m11);
            out.at(y, x) = r.lo + r.span() * static_cast<float>(m);
        }
    }
    return out;
}

}  // namespace deepcontrast
