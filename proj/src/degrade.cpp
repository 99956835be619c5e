#include "deepcontrast/degrade.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace deepcontrast {

void DegradationConfig::validate() const {
    if (!(sigma_px > 0.0f)) throw std::invalid_argument("sigma_px must be > 0");
    if (!(gain > 0.0f)) throw std::invalid_argument("gain must be > 0");
    if (!(alpha_bottom >= 0.0f && alpha_bottom <= alpha_top && alpha_top <= 1.0f))
        throw std::invalid_argument("need 0 <= alpha_bottom <= alpha_top <= 1");
}

namespace {

// Folds an arbitrary index into [0, n) by symmetric reflection with the edge
// pixel repeated (… c b a | a b c … | c b a …), period 2n.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int j = -radius; j <= radius; ++j) {
        const double w = std::exp(-(static_cast<double>(j) * j) / (2.0 * sigma * sigma));
        k[j + radius] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

}  // namespace

Plane gaussian_blur(const Plane& p, float sigma_px) {
    if (!(sigma_px > 0.0f)) throw std::invalid_argument("sigma_px must be > 0");
    const std::vector<double> kernel = gaussian_kernel(sigma_px);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int h = p.height, w = p.width;

    // horizontal pass into doubles, then vertical pass back to float
    std::vector<double> tmp(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const float* row = p.pixels.data() + static_cast<size_t>(y) * w;
        double* out = tmp.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[j + radius] * row[reflect_index(x + j, w)];
            out[x] = acc;
        }
    }
    Plane out = p;
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[j + radius] * tmp[static_cast<size_t>(reflect_index(y + j, h)) * w + x];
            out.pixels[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
        }
    }
    return out;
}

Plane poisson_noise(const Plane& p, float gain, Rng& rng, size_t* clipped_out) {
    if (!(gain > 0.0f)) throw std::invalid_argument("gain must be > 0");
    Plane out = p;
    size_t clipped = 0;
    const double g = gain;
    for (float& v : out.pixels) {
        double pixel = v;
        if (pixel < 0.0) {
            pixel = 0.0;
            ++clipped;
        }
        v = static_cast<float>(static_cast<double>(rng.poisson(pixel * g)) / g);
    }
    if (clipped_out) {
        *clipped_out = clipped;
    } else if (clipped > 0) {
        std::fprintf(stderr, "[degrade] clipped %zu negative pixels before Poisson sampling\n",
                     clipped);
    }
    return out;
}

std::vector<float> alpha_schedule(int n_slices, float alpha_top, float alpha_bottom) {
    if (n_slices < 1) throw std::invalid_argument("n_slices must be >= 1");
    std::vector<float> alphas(n_slices, alpha_top);
    if (n_slices == 1) return alphas;
    for (int z = 0; z < n_slices; ++z) {
        alphas[z] = alpha_top - (alpha_top - alpha_bottom) *
                                    (static_cast<float>(z) / static_cast<float>(n_slices - 1));
    }
    return alphas;
}

Plane degrade_plane(const Plane& p, float alpha, const DegradationConfig& cfg, Rng& rng) {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) throw std::invalid_argument("alpha must be in [0, 1]");
    cfg.validate();
    const Plane noised = poisson_noise(gaussian_blur(p, cfg.sigma_px), cfg.gain, rng);
    Plane out = p;
    const float beta = 1.0f - alpha;
    for (size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = alpha * p.pixels[i] + beta * noised.pixels[i];
    return out;
}

Volume degrade_volume(const Volume& v, const DegradationConfig& cfg, uint64_t round) {
    validate_volume(v);
    cfg.validate();
    const std::vector<float> alphas = alpha_schedule(v.n_slices(), cfg.alpha_top, cfg.alpha_bottom);
    Volume out = v;
    for (int z = 0; z < v.n_slices(); ++z) {
        Rng rng = substream(cfg.seed, {stream_tag::kDegrade, round, static_cast<uint64_t>(z)});
        out.planes[z] = degrade_plane(v.planes[z], alphas[z], cfg, rng);
    }
    return out;
}

std::pair<Volume, Volume> double_degrade(const Volume& v, const DegradationConfig& cfg) {
    Volume d = degrade_volume(v, cfg, 0);
    Volume e = degrade_volume(d, cfg, 1);
    return {std::move(d), std::move(e)};
}

}  // namespace deepcontrast
