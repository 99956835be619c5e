#pragma once

#include <utility>
#include <vector>

#include "deepcontrast/image.hpp"
#include "deepcontrast/metrics.hpp"

namespace deepcontrast {

/// Synthetic cell-border volumes: per-slice Voronoi tessellations whose seed
/// points drift slowly with depth, bright border bands on a dim background,
/// plus a depth-degraded pseudo-raw counterpart. Masks mark the border band
/// exactly (before smoothing), so downstream segmentation has exact ground
/// truth.
struct PhantomConfig {
    int width = 128;
    int height = 128;
    int n_slices = 32;
    int n_cells = 12;
    float border_width_px = 2.5f;
    float border_intensity = 200.0f;
    float background_intensity = 20.0f;
    float depth_blur_sigma_max = 4.0f;   // pseudo-raw blur at the deepest slice
    float depth_attenuation = 0.5f;      // fractional signal loss at the deepest slice
    float gain = 1.0f;                   // photons per intensity unit for pseudo-raw noise
    uint64_t seed = 0;

    void validate() const;
};

/// Clean volume plus exact per-slice border masks. Deterministic under seed.
std::pair<Volume, std::vector<SegmentationMask>> generate_clean(const PhantomConfig& cfg);

/// Nearest-seed label per pixel for every slice: the tessellation underlying
/// generate_clean, exposed so tests can verify the border band against an
/// independent boundary-length estimate.
std::vector<std::vector<int>> phantom_label_maps(const PhantomConfig& cfg);

/// Depth-dependent degradation of a clean phantom: per-slice Gaussian blur
/// with sigma interpolated from 0.5 to depth_blur_sigma_max, multiplicative
/// attenuation 1 - depth_attenuation * z/(N-1), then Poisson noise at the
/// configured gain. This profile intentionally differs from the training
/// degradation so model application is out-of-distribution.
Volume apply_pseudo_raw(const Volume& clean, const PhantomConfig& cfg);

}  // namespace deepcontrast
