#pragma once

#include <string>
#include <utility>
#include <vector>

#include "deepcontrast/image.hpp"
#include "deepcontrast/tensor.hpp"
#include "deepcontrast/unet.hpp"

namespace deepcontrast {

struct TrainConfig {
    double learning_rate = 4e-4;
    int epochs = 450;
    int steps_per_epoch = 200;
    int batch_size = 16;
    int patch_size = 128;
    double validation_fraction = 0.1;
    double lr_reduce_factor = 0.5;
    int lr_reduce_patience_epochs = 10;
    bool augment = false;
    uint64_t seed = 0;

    void validate(const ModelSpec& spec) const;
};

/// Desk-scale profile: CPU-minutes training for tests and experiments.
ModelSpec desk_model_spec();
TrainConfig desk_train_config();
/// Full-scale profile (depth 5, 32 channels, 450 epochs x 200 steps, batch 16,
/// patch 128, lr 4e-4).
ModelSpec paper_model_spec();
TrainConfig paper_train_config();

/// Samples co-located (input, target) patch pairs from aligned volume pairs:
/// uniform plane, then uniform crop offset; both patches are normalized with
/// the params of the full degraded (input) plane. Planes are split into
/// train/validation sets by a seeded shuffle; a fixed validation patch set is
/// drawn once at construction. Deterministic sequence under seed.
class PatchSampler {
public:
    PatchSampler(const std::vector<std::pair<Volume, Volume>>& pairs, const TrainConfig& cfg,
                 const ModelSpec& spec);

    void next_batch(Tensor4<float>& x, Tensor4<float>& target);
    const Tensor4<float>& validation_inputs() const { return val_x_; }
    const Tensor4<float>& validation_targets() const { return val_t_; }
    int n_train_planes() const { return static_cast<int>(train_planes_.size()); }
    int n_val_planes() const { return static_cast<int>(val_planes_.size()); }
    uint64_t dataset_hash() const { return dataset_hash_; }

    /// Crop offset used for the most recent patches (testing hook).
    const std::vector<std::pair<int, int>>& last_offsets() const { return last_offsets_; }

private:
    struct PlaneRef {
        Plane input;   // normalized copy
        Plane target;  // normalized with the input plane's params
    };
    void sample_patch(const PlaneRef& ref, int y0, int x0, int d8, float* x, float* t) const;

    TrainConfig cfg_;
    std::vector<PlaneRef> train_planes_, val_planes_;
    Tensor4<float> val_x_, val_t_;
    Rng rng_;
    uint64_t dataset_hash_ = 0;
    std::vector<std::pair<int, int>> last_offsets_;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
};

struct TensorBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct Checkpoint {
    ModelSpec spec;
    TrainConfig train_cfg;
    std::vector<EpochStats> history;
    uint64_t dataset_hash = 0;
    std::string code_version;
    uint64_t seed = 0;
    std::vector<TensorBlob> tensors;  // layer weights (and biases) in layer order

    UNet<float> to_model() const;
    static Checkpoint from_model(const UNet<float>& net);
};

/// Adam with standard moment constants (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
public:
    explicit AdamOptimizer(const UNet<float>& net, double learning_rate);
    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }
    void step(UNet<float>& net, const UNetGrads<float>& grads);

private:
    double lr_;
    long t_ = 0;
    std::vector<std::vector<float>> m_w_, v_w_, m_b_, v_b_;
};

/// Minimizes MAE with Adam; reduces the learning rate by lr_reduce_factor
/// when validation loss fails to improve for the patience window; returns
/// the best-validation-loss weights. Throws on NaN loss (divergence).
Checkpoint train(UNet<float>& net, PatchSampler& sampler, const TrainConfig& cfg);

/// Single archive: magic + JSON metadata block + raw float32 weight blobs.
/// Round-trips weights bit-exactly.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace deepcontrast
