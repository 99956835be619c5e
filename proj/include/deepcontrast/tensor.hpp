#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace deepcontrast {

/// Dense NCHW tensor.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

    size_t size() const { return data.size(); }
    size_t plane_size() const { return static_cast<size_t>(h) * w; }
    size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

    T* sample(int in) { return data.data() + static_cast<size_t>(in) * sample_size(); }
    const T* sample(int in) const { return data.data() + static_cast<size_t>(in) * sample_size(); }
    T* channel(int in, int ic) { return sample(in) + static_cast<size_t>(ic) * plane_size(); }
    const T* channel(int in, int ic) const {
        return sample(in) + static_cast<size_t>(ic) * plane_size();
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

}  // namespace deepcontrast
