#pragma once

#include <utility>
#include <vector>

#include "deepcontrast/image.hpp"
#include "deepcontrast/rng.hpp"

namespace deepcontrast {

/// Parameters of the forward degradation model
///   d(x) = alpha * x + (1 - alpha) * n(b(x))
/// with b a Gaussian blur and n Poisson noise at the given gain
/// (photons per intensity unit). alpha blends per slice along a linear
/// depth schedule from alpha_top to alpha_bottom.
struct DegradationConfig {
    float sigma_px = 20.0f;
    float gain = 0.1f;
    float alpha_top = 0.5f;
    float alpha_bottom = 0.3f;
    uint64_t seed = 0;

    void validate() const;
};

/// 2D Gaussian blur, kernel truncated at radius ceil(4*sigma), normalized to
/// unit sum, symmetric (edge-including) reflect padding. Separable passes,
/// double accumulation. Mean intensity is preserved by construction.
Plane gaussian_blur(const Plane& p, float sigma_px);

/// Per-pixel Poisson(pixel * gain) / gain. Negative pixels are clipped to 0
/// before sampling; the clip count is reported through clipped_out when given.
Plane poisson_noise(const Plane& p, float gain, Rng& rng, size_t* clipped_out = nullptr);

/// Linear alpha schedule over slice indices: alpha_top at z=0 down to
/// alpha_bottom at z=n_slices-1; a single slice gets alpha_top.
std::vector<float> alpha_schedule(int n_slices, float alpha_top, float alpha_bottom);

/// One application of the degradation model to a plane; blur then noise,
/// then blend: out = alpha * p + (1 - alpha) * n(b(p)).
Plane degrade_plane(const Plane& p, float alpha, const DegradationConfig& cfg, Rng& rng);

/// Degrades every plane with its scheduled alpha. The per-plane stream is
/// substream(cfg.seed, {kDegrade, round, depth_index}), so planes can be
/// processed in any order with identical results and repeated applications
/// (round 0, 1, ...) are independent.
Volume degrade_volume(const Volume& v, const DegradationConfig& cfg, uint64_t round = 0);

/// (d(v), d(d(v))): the second application uses round 1 substreams and the
/// same alpha schedule.
std::pair<Volume, Volume> double_degrade(const Volume& v, const DegradationConfig& cfg);

}  // namespace deepcontrast
