#include "deepcontrast/unet.hpp"

#include <cmath>
#include <stdexcept>

namespace deepcontrast {

void ModelSpec::validate() const {
    if (depth < 1) throw std::invalid_argument("model depth must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("base_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("kernel_size must be odd and >= 1");
}

namespace {

int level_channels(const ModelSpec& spec, int level) { return spec.base_channels << level; }

struct LayerShape {
    std::string name;
    int cin, cout, k;
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
    std::vector<LayerShape> shapes;
    const int d = spec.depth;
    const int k = spec.kernel_size;
    for (int i = 0; i < d; ++i) {
        const int cin = i == 0 ? 1 : level_channels(spec, i - 1);
        const int c = level_channels(spec, i);
        shapes.push_back({"enc" + std::to_string(i) + ".conv1", cin, c, k});
        shapes.push_back({"enc" + std::to_string(i) + ".conv2", c, c, k});
    }
    const int cb = level_channels(spec, d);
    shapes.push_back({"bottleneck.conv1", level_channels(spec, d - 1), cb, k});
    shapes.push_back({"bottleneck.conv2", cb, cb, k});
    for (int i = d - 1; i >= 0; --i) {
        const int c = level_channels(spec, i);
        const int c_above = i == d - 1 ? cb : level_channels(spec, i + 1);
        shapes.push_back({"dec" + std::to_string(i) + ".upconv", c_above, c, k});
        shapes.push_back({"dec" + std::to_string(i) + ".conv1", 2 * c, c, k});
        shapes.push_back({"dec" + std::to_string(i) + ".conv2", c, c, k});
    }
    shapes.push_back({"head", level_channels(spec, 0), 1, 1});
    return shapes;
}

}  // namespace

size_t analytic_parameter_count(const ModelSpec& spec) {
    size_t count = 0;
    for (const auto& s : layer_shapes(spec))
        count += static_cast<size_t>(s.cin) * s.cout * s.k * s.k;
    if (!spec.bias_free) count += analytic_offset_count(spec);
    return count;
}

size_t analytic_offset_count(const ModelSpec& spec) {
    if (spec.bias_free) return 0;
    size_t count = 0;
    for (const auto& s : layer_shapes(spec)) count += static_cast<size_t>(s.cout);
    return count;
}

template <typename T>
UNet<T>::UNet(const ModelSpec& spec, uint64_t init_seed) : spec_(spec) {
    spec.validate();
    const auto shapes = layer_shapes(spec);
    layers_.reserve(shapes.size());
    for (size_t li = 0; li < shapes.size(); ++li) {
        const auto& s = shapes[li];
        ConvLayer<T> layer;
        layer.name = s.name;
        layer.in_channels = s.cin;
        layer.out_channels = s.cout;
        layer.kernel = s.k;
        layer.weight = Tensor4<T>(s.cout, s.cin, s.k, s.k);
        Rng rng = substream(init_seed, {stream_tag::kModelInit, li});
        const double stddev = std::sqrt(2.0 / (static_cast<double>(s.cin) * s.k * s.k));
        for (T& v : layer.weight.data) v = static_cast<T>(stddev * rng.normal());
        if (!spec.bias_free) layer.bias.assign(s.cout, T(0));
        layers_.push_back(std::move(layer));
    }
}

template <typename T>
size_t UNet<T>::parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

template <typename T>
size_t UNet<T>::offset_parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers_) n += l.bias.size();
    return n;
}

template <typename T>
void UNet<T>::check_input(const Tensor4<T>& x) const {
    if (x.c != 1) throw std::invalid_argument("network input must have 1 channel");
    const int mult = spec_.size_multiple();
    if (x.h % mult != 0 || x.w % mult != 0)
        throw std::invalid_argument("input side " + std::to_string(x.h) + "x" +
                                    std::to_string(x.w) + " not divisible by 2^depth = " +
                                    std::to_string(mult));
    if (x.h < mult || x.w < mult)
        throw std::invalid_argument("input smaller than 2^depth");
}

template <typename T>
Tensor4<T> UNet<T>::forward_train(const Tensor4<T>& x, UNetCache<T>& cache) const {
    check_input(x);
    const int d = spec_.depth;
    cache.input = x;
    cache.enc_act1.assign(d, {});
    cache.enc_act2.assign(d, {});
    cache.pooled.assign(d, {});
    cache.pool_argmax.assign(d, {});
    cache.upsampled.assign(d, {});
    cache.up_act.assign(d, {});
    cache.cat.assign(d, {});
    cache.dec_act1.assign(d, {});
    cache.dec_act2.assign(d, {});

    ConvScratch<T> scratch;
    const Tensor4<T>* cur = &cache.input;
    for (int i = 0; i < d; ++i) {
        conv2d_forward(*cur, layers_[idx_enc1(i)].weight, layers_[idx_enc1(i)].bias,
                       cache.enc_act1[i], scratch);
        relu_inplace(cache.enc_act1[i]);
        conv2d_forward(cache.enc_act1[i], layers_[idx_enc2(i)].weight, layers_[idx_enc2(i)].bias,
                       cache.enc_act2[i], scratch);
        relu_inplace(cache.enc_act2[i]);
        maxpool2_forward(cache.enc_act2[i], cache.pooled[i], cache.pool_argmax[i]);
        cur = &cache.pooled[i];
    }
    conv2d_forward(*cur, layers_[idx_bott1()].weight, layers_[idx_bott1()].bias, cache.bott_act1,
                   scratch);
    relu_inplace(cache.bott_act1);
    conv2d_forward(cache.bott_act1, layers_[idx_bott2()].weight, layers_[idx_bott2()].bias,
                   cache.bott_act2, scratch);
    relu_inplace(cache.bott_act2);

    cur = &cache.bott_act2;
    for (int i = d - 1; i >= 0; --i) {
        upsample2_forward(*cur, cache.upsampled[i]);
        conv2d_forward(cache.upsampled[i], layers_[idx_up(i)].weight, layers_[idx_up(i)].bias,
                       cache.up_act[i], scratch);
        relu_inplace(cache.up_act[i]);
        concat_forward(cache.up_act[i], cache.enc_act2[i], cache.cat[i]);
        conv2d_forward(cache.cat[i], layers_[idx_dec1(i)].weight, layers_[idx_dec1(i)].bias,
                       cache.dec_act1[i], scratch);
        relu_inplace(cache.dec_act1[i]);
        conv2d_forward(cache.dec_act1[i], layers_[idx_dec2(i)].weight, layers_[idx_dec2(i)].bias,
                       cache.dec_act2[i], scratch);
        relu_inplace(cache.dec_act2[i]);
        cur = &cache.dec_act2[i];
    }
    Tensor4<T> y;
    conv2d_forward(*cur, layers_[idx_head()].weight, layers_[idx_head()].bias, y, scratch);
    return y;
}

template <typename T>
Tensor4<T> UNet<T>::forward(const Tensor4<T>& x) const {
    UNetCache<T> cache;
    return forward_train(x, cache);
}

template <typename T>
UNetGrads<T> UNet<T>::make_grads() const {
    UNetGrads<T> g;
    g.weight.reserve(layers_.size());
    g.bias.reserve(layers_.size());
    for (const auto& l : layers_) {
        g.weight.push_back(Tensor4<T>(l.weight.n, l.weight.c, l.weight.h, l.weight.w));
        g.bias.push_back(std::vector<T>(l.bias.size(), T(0)));
    }
    return g;
}

template <typename T>
void UNet<T>::backward(const Tensor4<T>& dy, const UNetCache<T>& cache, UNetGrads<T>& grads) const {
    const int d = spec_.depth;
    ConvScratch<T> s1, s2;

    Tensor4<T> dcur;
    conv2d_backward(cache.dec_act2[0], layers_[idx_head()].weight, dy, &dcur,
                    grads.weight[idx_head()], grads.bias[idx_head()], s1, s2);

    std::vector<Tensor4<T>> dskip(d);
    for (int i = 0; i < d; ++i) {
        relu_backward_inplace(cache.dec_act2[i], dcur);
        Tensor4<T> dtmp;
        conv2d_backward(cache.dec_act1[i], layers_[idx_dec2(i)].weight, dcur, &dtmp,
                        grads.weight[idx_dec2(i)], grads.bias[idx_dec2(i)], s1, s2);
        relu_backward_inplace(cache.dec_act1[i], dtmp);
        Tensor4<T> dcat;
        conv2d_backward(cache.cat[i], layers_[idx_dec1(i)].weight, dtmp, &dcat,
                        grads.weight[idx_dec1(i)], grads.bias[idx_dec1(i)], s1, s2);
        Tensor4<T> dup_act;
        concat_backward(dcat, cache.up_act[i].c, dup_act, dskip[i]);
        relu_backward_inplace(cache.up_act[i], dup_act);
        Tensor4<T> dupsampled;
        conv2d_backward(cache.upsampled[i], layers_[idx_up(i)].weight, dup_act, &dupsampled,
                        grads.weight[idx_up(i)], grads.bias[idx_up(i)], s1, s2);
        upsample2_backward(dupsampled, dcur);
    }

    relu_backward_inplace(cache.bott_act2, dcur);
    Tensor4<T> dtmp;
    conv2d_backward(cache.bott_act1, layers_[idx_bott2()].weight, dcur, &dtmp,
                    grads.weight[idx_bott2()], grads.bias[idx_bott2()], s1, s2);
    relu_backward_inplace(cache.bott_act1, dtmp);
    conv2d_backward(cache.pooled[d - 1], layers_[idx_bott1()].weight, dtmp, &dcur,
                    grads.weight[idx_bott1()], grads.bias[idx_bott1()], s1, s2);

    for (int i = d - 1; i >= 0; --i) {
        Tensor4<T> dact2(cache.enc_act2[i].n, cache.enc_act2[i].c, cache.enc_act2[i].h,
                         cache.enc_act2[i].w);
        maxpool2_backward(dcur, cache.pool_argmax[i], dact2);
        for (size_t j = 0; j < dact2.data.size(); ++j) dact2.data[j] += dskip[i].data[j];
        relu_backward_inplace(cache.enc_act2[i], dact2);
        conv2d_backward(cache.enc_act1[i], layers_[idx_enc2(i)].weight, dact2, &dtmp,
                        grads.weight[idx_enc2(i)], grads.bias[idx_enc2(i)], s1, s2);
        relu_backward_inplace(cache.enc_act1[i], dtmp);
        const Tensor4<T>& conv_in = i == 0 ? cache.input : cache.pooled[i - 1];
        conv2d_backward(conv_in, layers_[idx_enc1(i)].weight, dtmp, i == 0 ? nullptr : &dcur,
                        grads.weight[idx_enc1(i)], grads.bias[idx_enc1(i)], s1, s2);
    }
}

template <typename T>
size_t UNet<T>::flat_size() const {
    return parameter_count();
}

template <typename T>
T UNet<T>::get_flat(size_t idx) const {
    for (const auto& l : layers_) {
        if (idx < l.weight.size()) return l.weight.data[idx];
        idx -= l.weight.size();
        if (idx < l.bias.size()) return l.bias[idx];
        idx -= l.bias.size();
    }
    throw std::out_of_range("flat parameter index");
}

template <typename T>
void UNet<T>::set_flat(size_t idx, T v) {
    for (auto& l : layers_) {
        if (idx < l.weight.size()) {
            l.weight.data[idx] = v;
            return;
        }
        idx -= l.weight.size();
        if (idx < l.bias.size()) {
            l.bias[idx] = v;
            return;
        }
        idx -= l.bias.size();
    }
    throw std::out_of_range("flat parameter index");
}

template <typename T>
T UNet<T>::grad_flat(const UNetGrads<T>& g, size_t idx) const {
    for (size_t li = 0; li < layers_.size(); ++li) {
        if (idx < g.weight[li].size()) return g.weight[li].data[idx];
        idx -= g.weight[li].size();
        if (idx < g.bias[li].size()) return g.bias[li][idx];
        idx -= g.bias[li].size();
    }
    throw std::out_of_range("flat parameter index");
}

template <typename T>
T mae_loss(const Tensor4<T>& pred, const Tensor4<T>& target, Tensor4<T>* dpred) {
    if (!pred.same_shape(target)) throw std::invalid_argument("mae_loss: shape mismatch");
    const T inv_n = T(1) / static_cast<T>(pred.size());
    T acc = T(0);
    if (dpred) *dpred = Tensor4<T>(pred.n, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const T diff = pred.data[i] - target.data[i];
        acc += diff < T(0) ? -diff : diff;
        if (dpred) dpred->data[i] = (diff > T(0) ? inv_n : (diff < T(0) ? -inv_n : T(0)));
    }
    return acc * inv_n;
}

template class UNet<float>;
template class UNet<double>;
template float mae_loss<float>(const Tensor4<float>&, const Tensor4<float>&, Tensor4<float>*);
template double mae_loss<double>(const Tensor4<double>&, const Tensor4<double>&, Tensor4<double>*);

}  // namespace deepcontrast
