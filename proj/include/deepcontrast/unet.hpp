#pragma once

#include <string>
#include <vector>

#include "deepcontrast/net_ops.hpp"
#include "deepcontrast/rng.hpp"
#include "deepcontrast/tensor.hpp"

namespace deepcontrast {

/// Encoder-decoder topology: `depth` resolution levels with channel doubling,
/// two 3x3 convolutions + ReLU per level, 2x2 max-pool down, nearest-neighbor
/// upsample + convolution up, skip concatenation, and a single-channel linear
/// 1x1 head. With bias_free no layer carries an additive offset, which makes
/// the whole network positively homogeneous: f(a*x) = a*f(x) for a > 0.
struct ModelSpec {
    int depth = 5;
    int base_channels = 32;
    int kernel_size = 3;
    bool bias_free = true;

    void validate() const;
    int size_multiple() const { return 1 << depth; }
};

template <typename T>
struct ConvLayer {
    std::string name;
    int in_channels = 0, out_channels = 0, kernel = 0;
    Tensor4<T> weight;    // (out, in, k, k)
    std::vector<T> bias;  // empty when bias-free
};

template <typename T>
struct UNetCache {
    Tensor4<T> input;
    std::vector<Tensor4<T>> enc_act1, enc_act2, pooled;
    std::vector<std::vector<uint32_t>> pool_argmax;
    Tensor4<T> bott_act1, bott_act2;
    std::vector<Tensor4<T>> upsampled, up_act, cat, dec_act1, dec_act2;
};

template <typename T>
struct UNetGrads {
    std::vector<Tensor4<T>> weight;
    std::vector<std::vector<T>> bias;
    void zero() {
        for (auto& w : weight) w.fill(T(0));
        for (auto& b : bias) std::fill(b.begin(), b.end(), T(0));
    }
};

template <typename T>
class UNet {
public:
    UNet(const ModelSpec& spec, uint64_t init_seed);

    const ModelSpec& spec() const { return spec_; }
    std::vector<ConvLayer<T>>& layers() { return layers_; }
    const std::vector<ConvLayer<T>>& layers() const { return layers_; }

    /// Total trainable scalar parameters / additive-offset parameters.
    size_t parameter_count() const;
    size_t offset_parameter_count() const;

    Tensor4<T> forward(const Tensor4<T>& x) const;
    Tensor4<T> forward_train(const Tensor4<T>& x, UNetCache<T>& cache) const;
    void backward(const Tensor4<T>& dy, const UNetCache<T>& cache, UNetGrads<T>& grads) const;

    UNetGrads<T> make_grads() const;

    /// Flat views over all trainable scalars (weights then biases per layer,
    /// in layer order); used by the optimizer and the finite-difference check.
    size_t flat_size() const;
    T get_flat(size_t idx) const;
    void set_flat(size_t idx, T v);
    T grad_flat(const UNetGrads<T>& g, size_t idx) const;

private:
    void check_input(const Tensor4<T>& x) const;
    ModelSpec spec_;
    std::vector<ConvLayer<T>> layers_;
    // layer vector order: enc(i).conv1, enc(i).conv2 for i=0..D-1;
    // bottleneck.conv1, .conv2; dec(i).upconv, .conv1, .conv2 for i=D-1..0;
    // head. Index helpers below.
    int idx_enc1(int i) const { return 2 * i; }
    int idx_enc2(int i) const { return 2 * i + 1; }
    int idx_bott1() const { return 2 * spec_.depth; }
    int idx_bott2() const { return 2 * spec_.depth + 1; }
    int idx_up(int i) const { return 2 * spec_.depth + 2 + 3 * (spec_.depth - 1 - i); }
    int idx_dec1(int i) const { return idx_up(i) + 1; }
    int idx_dec2(int i) const { return idx_up(i) + 2; }
    int idx_head() const { return 2 * spec_.depth + 2 + 3 * spec_.depth; }
};

/// Scalar parameter count implied by the topology. For channel widths
/// C_i = base * 2^i (i < depth) and C_D = base * 2^depth at the bottleneck:
///   weights = k^2 * [ (1*C_0 + C_0^2)                      encoder level 0
///                   + sum_{i>=1} (C_{i-1} C_i + C_i^2)     encoder levels
///                   + (C_{D-1} C_D + C_D^2)                bottleneck
///                   + sum_i (C_next(i) C_i + 2 C_i^2 + C_i^2) ] decoder
///                   + C_0                                  1x1 head
///   offsets (only when not bias_free) = sum of every conv's out_channels.
size_t analytic_parameter_count(const ModelSpec& spec);
size_t analytic_offset_count(const ModelSpec& spec);

/// Mean absolute error and its gradient with respect to pred.
template <typename T>
T mae_loss(const Tensor4<T>& pred, const Tensor4<T>& target, Tensor4<T>* dpred = nullptr);

extern template class UNet<float>;
extern template class UNet<double>;
extern template float mae_loss<float>(const Tensor4<float>&, const Tensor4<float>&,
                                      Tensor4<float>*);
extern template double mae_loss<double>(const Tensor4<double>&, const Tensor4<double>&,
                                        Tensor4<double>*);

}  // namespace deepcontrast
