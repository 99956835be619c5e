#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "deepcontrast/image.hpp"
#include "deepcontrast/train.hpp"

namespace deepcontrast {

struct InferenceConfig {
    int iterations = 1;      // k in iterated application
    int tile_size = 256;     // must be divisible by the model's size multiple
    int tile_overlap = 32;   // px; must be < tile_size / 2
    float clip_floor = 1e-6f;  // outputs are clipped below clip_floor * (hi - lo)

    void validate() const;
};

/// Anything that maps a normalized plane to a same-size normalized plane.
class PlaneModel {
public:
    virtual ~PlaneModel() = default;
    /// Input sides passed to apply() are always divisible by this.
    virtual int size_multiple() const = 0;
    virtual Plane apply(const Plane& normalized) const = 0;
};

/// Wraps a trained network for plane-level inference.
class NetworkPlaneModel : public PlaneModel {
public:
    explicit NetworkPlaneModel(UNet<float> net) : net_(std::move(net)) {}
    explicit NetworkPlaneModel(const Checkpoint& c) : net_(c.to_model()) {}
    int size_multiple() const override { return net_.spec().size_multiple(); }
    Plane apply(const Plane& normalized) const override;
    const UNet<float>& network() const { return net_; }

private:
    UNet<float> net_;
};

/// Pixel-wise stub (identity, doubling, ...) for tiling-transparency tests.
class PixelwiseModel : public PlaneModel {
public:
    explicit PixelwiseModel(std::function<float(float)> fn) : fn_(std::move(fn)) {}
    int size_multiple() const override { return 1; }
    Plane apply(const Plane& normalized) const override;

private:
    std::function<float(float)> fn_;
};

/// One enhancement application: percentile-normalize, run the model over
/// overlapping tiles blended with linear feathering weights, denormalize with
/// the input's params, clip at the floor. Output shape equals input shape.
/// Planes that fit in a single tile take a direct shortcut.
Plane enhance_plane(const PlaneModel& model, const Plane& p, const InferenceConfig& cfg);

namespace detail {
/// The general tile-and-blend machinery without the single-tile shortcut,
/// operating on an already-normalized plane; the shortcut must agree with
/// this path (tiling-transparency checks).
Plane enhance_normalized_tiled(const PlaneModel& model, const Plane& normalized,
                               const InferenceConfig& cfg);
}  // namespace detail

Volume enhance_volume(const PlaneModel& model, const Volume& v, const InferenceConfig& cfg);

/// [DC^1(v), DC^2(v), ..., DC^k(v)]; each application re-normalizes its own
/// input, so iteration happens in the intensity space the model was trained
/// on. All intermediates are returned for metric sweeps.
std::vector<Volume> enhance_iterative(const PlaneModel& model, const Volume& v,
                                      const InferenceConfig& cfg);

}  // namespace deepcontrast
