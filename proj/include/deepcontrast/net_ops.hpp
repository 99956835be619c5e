#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "deepcontrast/tensor.hpp"

// Layer primitives for the encoder-decoder network: zero-padded same-size
// convolution (im2col + GEMM), ReLU, 2x2 max pooling, nearest-neighbor
// upsampling and channel concatenation, each with its backward pass.
// Everything is sequential and accumulates in a fixed order, so results are
// reproducible bit-for-bit.

namespace deepcontrast {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<MatRM<T>>;
template <typename T>
using MapConst = Eigen::Map<const MatRM<T>>;

/// Scratch space shared across conv calls to avoid reallocation.
template <typename T>
struct ConvScratch {
    std::vector<T> cols;  // (Cin*k*k) x (h*w) column matrix for one sample
    void ensure(size_t n) {
        if (cols.size() < n) cols.resize(n);
    }
};

template <typename T>
void im2col(const T* src, int c, int h, int w, int k, int pad, T* cols) {
    const int hw = h * w;
    // row (ic, ky, kx) of the column matrix holds src[ic][y+ky-pad][x+kx-pad]
    T* out = cols;
    for (int ic = 0; ic < c; ++ic) {
        const T* chan = src + static_cast<size_t>(ic) * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) {
                        std::fill(out, out + w, T(0));
                        out += w;
                        continue;
                    }
                    const T* row = chan + static_cast<size_t>(sy) * w;
                    const int x_lo = std::max(0, pad - kx);
                    const int x_hi = std::min(w, w + pad - kx);
                    for (int x = 0; x < x_lo; ++x) out[x] = T(0);
                    for (int x = x_lo; x < x_hi; ++x) out[x] = row[x + kx - pad];
                    for (int x = x_hi; x < w; ++x) out[x] = T(0);
                    out += w;
                }
            }
        }
    }
}

template <typename T>
void col2im_accumulate(const T* cols, int c, int h, int w, int k, int pad, T* dst) {
    const int hw = h * w;
    const T* in = cols;
    for (int ic = 0; ic < c; ++ic) {
        T* chan = dst + static_cast<size_t>(ic) * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) {
                        in += w;
                        continue;
                    }
                    T* row = chan + static_cast<size_t>(sy) * w;
                    const int x_lo = std::max(0, pad - kx);
                    const int x_hi = std::min(w, w + pad - kx);
                    for (int x = x_lo; x < x_hi; ++x) row[x + kx - pad] += in[x];
                    in += w;
                }
            }
        }
    }
}

/// y = conv(x, w) + b (same-size, zero padding). w is (Cout, Cin, k, k);
/// bias may be empty for bias-free layers.
template <typename T>
void conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weight, const std::vector<T>& bias,
                    Tensor4<T>& y, ConvScratch<T>& scratch) {
    const int k = weight.h;
    const int pad = k / 2;
    const int cin = x.c, cout = weight.n;
    const int hw = x.h * x.w;
    const int krows = cin * k * k;
    y = Tensor4<T>(x.n, cout, x.h, x.w);
    scratch.ensure(static_cast<size_t>(krows) * hw);
    MapConst<T> wmat(weight.data.data(), cout, krows);
    for (int in = 0; in < x.n; ++in) {
        im2col(x.sample(in), cin, x.h, x.w, k, pad, scratch.cols.data());
        MapConst<T> cols(scratch.cols.data(), krows, hw);
        MapMat<T> out(y.sample(in), cout, hw);
        out.noalias() = wmat * cols;
        if (!bias.empty())
            for (int co = 0; co < cout; ++co) {
                T* chan = y.channel(in, co);
                const T b = bias[co];
                for (int i = 0; i < hw; ++i) chan[i] += b;
            }
    }
}

/// Backward pass; accumulates dweight/dbias (caller zeroes them first) and
/// writes dx when non-null.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& dy,
                     Tensor4<T>* dx, Tensor4<T>& dweight, std::vector<T>& dbias,
                     ConvScratch<T>& scratch, ConvScratch<T>& scratch2) {
    const int k = weight.h;
    const int pad = k / 2;
    const int cin = x.c, cout = weight.n;
    const int hw = x.h * x.w;
    const int krows = cin * k * k;
    scratch.ensure(static_cast<size_t>(krows) * hw);
    scratch2.ensure(static_cast<size_t>(krows) * hw);
    MapConst<T> wmat(weight.data.data(), cout, krows);
    MapMat<T> dwmat(dweight.data.data(), cout, krows);
    if (dx) *dx = Tensor4<T>(x.n, cin, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
        MapConst<T> dout(dy.sample(in), cout, hw);
        im2col(x.sample(in), cin, x.h, x.w, k, pad, scratch.cols.data());
        MapConst<T> cols(scratch.cols.data(), krows, hw);
        dwmat.noalias() += dout * cols.transpose();
        if (!dbias.empty())
            for (int co = 0; co < cout; ++co) {
                const T* chan = dy.channel(in, co);
                T acc = T(0);
                for (int i = 0; i < hw; ++i) acc += chan[i];
                dbias[co] += acc;
            }
        if (dx) {
            MapMat<T> dcols(scratch2.cols.data(), krows, hw);
            dcols.noalias() = wmat.transpose() * dout;
            col2im_accumulate(scratch2.cols.data(), cin, x.h, x.w, k, pad, dx->sample(in));
        }
    }
}

template <typename T>
void relu_inplace(Tensor4<T>& x) {
    for (T& v : x.data)
        if (v < T(0)) v = T(0);
}

/// dx = dy where the stored post-activation is positive, else 0 (in place on dy).
template <typename T>
void relu_backward_inplace(const Tensor4<T>& post, Tensor4<T>& dy) {
    for (size_t i = 0; i < dy.data.size(); ++i)
        if (!(post.data[i] > T(0))) dy.data[i] = T(0);
}

/// 2x2 max pooling, stride 2. argmax records the winning source offset
/// within each sample for the backward scatter.
template <typename T>
void maxpool2_forward(const Tensor4<T>& x, Tensor4<T>& y, std::vector<uint32_t>& argmax) {
    const int oh = x.h / 2, ow = x.w / 2;
    y = Tensor4<T>(x.n, x.c, oh, ow);
    argmax.assign(y.size(), 0);
    size_t oi = 0;
    for (int in = 0; in < x.n; ++in) {
        for (int ic = 0; ic < x.c; ++ic) {
            const T* src = x.channel(in, ic);
            T* dst = y.channel(in, ic);
            for (int y0 = 0; y0 < oh; ++y0) {
                for (int x0 = 0; x0 < ow; ++x0) {
                    const int base = 2 * y0 * x.w + 2 * x0;
                    int best = base;
                    T bv = src[base];
                    const int cand[3] = {base + 1, base + x.w, base + x.w + 1};
                    for (int ci = 0; ci < 3; ++ci)
                        if (src[cand[ci]] > bv) {
                            bv = src[cand[ci]];
                            best = cand[ci];
                        }
                    dst[y0 * ow + x0] = bv;
                    argmax[oi++] = static_cast<uint32_t>(
                        (static_cast<size_t>(ic) * x.h * x.w) + best);
                }
            }
        }
    }
}

template <typename T>
void maxpool2_backward(const Tensor4<T>& dy, const std::vector<uint32_t>& argmax, Tensor4<T>& dx) {
    size_t oi = 0;
    for (int in = 0; in < dy.n; ++in) {
        T* dst = dx.sample(in);
        const size_t count = dy.sample_size();
        const T* src = dy.sample(in);
        for (size_t i = 0; i < count; ++i, ++oi) dst[argmax[oi]] += src[i];
    }
}

/// Nearest-neighbor 2x upsampling.
template <typename T>
void upsample2_forward(const Tensor4<T>& x, Tensor4<T>& y) {
    y = Tensor4<T>(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* src = x.channel(in, ic);
            T* dst = y.channel(in, ic);
            for (int yy = 0; yy < x.h; ++yy)
                for (int xx = 0; xx < x.w; ++xx) {
                    const T v = src[yy * x.w + xx];
                    T* o = dst + (2 * yy) * (2 * x.w) + 2 * xx;
                    o[0] = v;
                    o[1] = v;
                    o[2 * x.w] = v;
                    o[2 * x.w + 1] = v;
                }
        }
}

template <typename T>
void upsample2_backward(const Tensor4<T>& dy, Tensor4<T>& dx) {
    dx = Tensor4<T>(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int in = 0; in < dy.n; ++in)
        for (int ic = 0; ic < dy.c; ++ic) {
            const T* src = dy.channel(in, ic);
            T* dst = dx.channel(in, ic);
            for (int yy = 0; yy < dx.h; ++yy)
                for (int xx = 0; xx < dx.w; ++xx) {
                    const T* s = src + (2 * yy) * dy.w + 2 * xx;
                    dst[yy * dx.w + xx] = s[0] + s[1] + s[dy.w] + s[dy.w + 1];
                }
        }
}

/// y = concat(a, b) along channels.
template <typename T>
void concat_forward(const Tensor4<T>& a, const Tensor4<T>& b, Tensor4<T>& y) {
    y = Tensor4<T>(a.n, a.c + b.c, a.h, a.w);
    for (int in = 0; in < a.n; ++in) {
        std::copy(a.sample(in), a.sample(in) + a.sample_size(), y.sample(in));
        std::copy(b.sample(in), b.sample(in) + b.sample_size(),
                  y.sample(in) + a.sample_size());
    }
}

template <typename T>
void concat_backward(const Tensor4<T>& dy, int a_channels, Tensor4<T>& da, Tensor4<T>& db) {
    da = Tensor4<T>(dy.n, a_channels, dy.h, dy.w);
    db = Tensor4<T>(dy.n, dy.c - a_channels, dy.h, dy.w);
    for (int in = 0; in < dy.n; ++in) {
        std::copy(dy.sample(in), dy.sample(in) + da.sample_size(), da.sample(in));
        std::copy(dy.sample(in) + da.sample_size(), dy.sample(in) + dy.sample_size(),
                  db.sample(in));
    }
}

}  // namespace deepcontrast
