#pragma once

#include <cstddef>
#include <vector>

#include "synthdet/core/errors.hpp"

namespace synthdet::nn {

// Dense NCHW tensor. Linear layers use h = w = 1.
template <typename T = float>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

    size_t size() const { return v.size(); }
    size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

    T& at(int i, int ci, int y, int x) {
        return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
    }
    T at(int i, int ci, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
    }

    T* sample(int i) { return v.data() + static_cast<size_t>(i) * sample_size(); }
    const T* sample(int i) const { return v.data() + static_cast<size_t>(i) * sample_size(); }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

}  // namespace synthdet::nn
