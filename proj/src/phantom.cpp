#include "deepcontrast/phantom.hpp"

#include <cmath>
#include <stdexcept>

#include "deepcontrast/degrade.hpp"
#include "deepcontrast/rng.hpp"

namespace deepcontrast {

void PhantomConfig::validate() const {
    if (width < 16 || height < 16) throw std::invalid_argument("phantom planes must be >= 16 px");
    if (n_slices < 1) throw std::invalid_argument("n_slices must be >= 1");
    if (n_cells < 2) throw std::invalid_argument("n_cells must be >= 2");
    if (!(border_width_px >= 1.0f)) throw std::invalid_argument("border_width_px must be >= 1");
    if (!(border_intensity > background_intensity) || background_intensity < 0.0f)
        throw std::invalid_argument("need border_intensity > background_intensity >= 0");
    if (!(depth_attenuation >= 0.0f && depth_attenuation < 1.0f))
        throw std::invalid_argument("depth_attenuation must be in [0, 1)");
    if (!(depth_blur_sigma_max >= 0.0f))
        throw std::invalid_argument("depth_blur_sigma_max must be >= 0");
    if (!(gain > 0.0f)) throw std::invalid_argument("gain must be > 0");
}

namespace {

struct SeedPoint {
    double x, y;
};

constexpr double kDriftSigmaPx = 0.6;   // per-slice random walk of each cell seed
constexpr double kMinSeedDistPx = 4.0;  // resample geometry below this separation
constexpr int kFieldGrid = 9;           // coarse grid of the smooth intensity field
constexpr double kFieldAmplitude = 0.2; // relative background/staining variation

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Smooth multiplicative intensity field (staining unevenness): white noise on
// a coarse grid, bilinearly upsampled, shared by all slices of one phantom.
std::vector<double> intensity_field(const PhantomConfig& cfg, Rng& rng) {
    double grid[kFieldGrid][kFieldGrid];
    for (auto& row : grid)
        for (double& v : row) v = 1.0 + kFieldAmplitude * (2.0 * rng.uniform() - 1.0);
    std::vector<double> field(static_cast<size_t>(cfg.height) * cfg.width);
    for (int y = 0; y < cfg.height; ++y) {
        const double gy = static_cast<double>(y) / (cfg.height - 1) * (kFieldGrid - 1);
        const int y0 = std::min(static_cast<int>(gy), kFieldGrid - 2);
        const double fy = gy - y0;
        for (int x = 0; x < cfg.width; ++x) {
            const double gx = static_cast<double>(x) / (cfg.width - 1) * (kFieldGrid - 1);
            const int x0 = std::min(static_cast<int>(gx), kFieldGrid - 2);
            const double fx = gx - x0;
            field[static_cast<size_t>(y) * cfg.width + x] =
                (1 - fy) * ((1 - fx) * grid[y0][x0] + fx * grid[y0][x0 + 1]) +
                fy * ((1 - fx) * grid[y0 + 1][x0] + fx * grid[y0 + 1][x0 + 1]);
        }
    }
    return field;
}

// Seed trajectories for all slices; resamples the whole geometry if any two
// seeds come closer than kMinSeedDistPx anywhere in the stack.
std::vector<std::vector<SeedPoint>> seed_trajectories(const PhantomConfig& cfg) {
    for (uint64_t attempt = 0;; ++attempt) {
        Rng rng = substream(cfg.seed, {stream_tag::kPhantomGeometry, attempt});
        std::vector<std::vector<SeedPoint>> slices(cfg.n_slices);
        std::vector<SeedPoint> pts(cfg.n_cells);
        for (auto& p : pts) {
            p.x = rng.uniform() * cfg.width;
            p.y = rng.uniform() * cfg.height;
        }
        bool ok = true;
        for (int z = 0; z < cfg.n_slices && ok; ++z) {
            if (z > 0) {
                for (auto& p : pts) {
                    p.x = clamp(p.x + kDriftSigmaPx * rng.normal(), 0.0, cfg.width - 1.0);
                    p.y = clamp(p.y + kDriftSigmaPx * rng.normal(), 0.0, cfg.height - 1.0);
                }
            }
            for (size_t i = 0; i < pts.size() && ok; ++i)
                for (size_t j = i + 1; j < pts.size(); ++j) {
                    const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
                    if (dx * dx + dy * dy < kMinSeedDistPx * kMinSeedDistPx) {
                        ok = false;
                        break;
                    }
                }
            slices[z] = pts;
        }
        if (ok) return slices;
    }
}

}  // namespace

std::pair<Volume, std::vector<SegmentationMask>> generate_clean(const PhantomConfig& cfg) {
    cfg.validate();
    const auto trajectories = seed_trajectories(cfg);
    Rng field_rng = substream(cfg.seed, {stream_tag::kPhantomGeometry, 0xf1e1d});
    const std::vector<double> field = intensity_field(cfg, field_rng);

    Volume vol;
    vol.planes.reserve(cfg.n_slices);
    std::vector<SegmentationMask> masks;
    masks.reserve(cfg.n_slices);

    for (int z = 0; z < cfg.n_slices; ++z) {
        const auto& seeds = trajectories[z];
        Plane plane(cfg.height, cfg.width, cfg.background_intensity, z);
        SegmentationMask mask(cfg.height, cfg.width);
        for (int y = 0; y < cfg.height; ++y) {
            for (int x = 0; x < cfg.width; ++x) {
                // two nearest seeds; distance to their bisector is
                // (d2^2 - d1^2) / (2 |s1 - s2|)
                double d1 = 1e300, d2 = 1e300;
                int i1 = -1, i2 = -1;
                for (size_t i = 0; i < seeds.size(); ++i) {
                    const double dx = x - seeds[i].x, dy = y - seeds[i].y;
                    const double d = dx * dx + dy * dy;
                    if (d < d1) {
                        d2 = d1;
                        i2 = i1;
                        d1 = d;
                        i1 = static_cast<int>(i);
                    } else if (d < d2) {
                        d2 = d;
                        i2 = static_cast<int>(i);
                    }
                }
                const double sx = seeds[i1].x - seeds[i2].x;
                const double sy = seeds[i1].y - seeds[i2].y;
                const double seed_dist = std::sqrt(sx * sx + sy * sy);
                const double to_border = (d2 - d1) / (2.0 * seed_dist);
                const double local = field[static_cast<size_t>(y) * cfg.width + x];
                if (to_border <= cfg.border_width_px * 0.5) {
                    plane.at(y, x) = static_cast<float>(cfg.border_intensity * local);
                    mask.set(y, x, true);
                } else {
                    plane.at(y, x) = static_cast<float>(cfg.background_intensity * local);
                }
            }
        }
        vol.planes.push_back(gaussian_blur(plane, 1.0f));  // mild smoothing for realism
        vol.planes.back().depth_index = z;
        masks.push_back(std::move(mask));
    }
    return {std::move(vol), std::move(masks)};
}

std::vector<std::vector<int>> phantom_label_maps(const PhantomConfig& cfg) {
    cfg.validate();
    const auto trajectories = seed_trajectories(cfg);
    std::vector<std::vector<int>> maps(cfg.n_slices);
    for (int z = 0; z < cfg.n_slices; ++z) {
        const auto& seeds = trajectories[z];
        auto& labels = maps[z];
        labels.resize(static_cast<size_t>(cfg.height) * cfg.width);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x) {
                double best = 1e300;
                int label = 0;
                for (size_t i = 0; i < seeds.size(); ++i) {
                    const double dx = x - seeds[i].x, dy = y - seeds[i].y;
                    const double d = dx * dx + dy * dy;
                    if (d < best) {
                        best = d;
                        label = static_cast<int>(i);
                    }
                }
                labels[static_cast<size_t>(y) * cfg.width + x] = label;
            }
    }
    return maps;
}

Volume apply_pseudo_raw(const Volume& clean, const PhantomConfig& cfg) {
    cfg.validate();
    validate_volume(clean);
    const int n = clean.n_slices();
    Volume out = clean;
    // Shallow blur endpoint is 0.5 px, capped by the deep endpoint so that a
    // near-zero depth_blur_sigma_max degenerates to no blur at all depths.
    const double sigma_top = std::min(0.5, static_cast<double>(cfg.depth_blur_sigma_max));
    for (int z = 0; z < n; ++z) {
        const double frac = n == 1 ? 0.0 : static_cast<double>(z) / (n - 1);
        const double sigma = sigma_top + (cfg.depth_blur_sigma_max - sigma_top) * frac;
        const double atten = 1.0 - cfg.depth_attenuation * frac;
        Plane p = sigma > 1e-6 ? gaussian_blur(clean.planes[z], static_cast<float>(sigma))
                               : clean.planes[z];
        for (float& v : p.pixels) v = static_cast<float>(v * atten);
        Rng rng = substream(cfg.seed, {stream_tag::kPhantomNoise, static_cast<uint64_t>(z)});
        out.planes[z] = poisson_noise(p, cfg.gain, rng);
        out.planes[z].depth_index = z;
    }
    return out;
}

}  // namespace deepcontrast
