#pragma once

#include <cmath>
#include <vector>

#include "synthdet/core/image.hpp"

namespace synthdet {

// Truncated 1-D Gaussian, radius ceil(3*sigma), normalized to sum 1.
inline std::vector<double> gaussian_kernel(double sigma) {
    int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    return k;
}

namespace detail {
// Symmetric reflection that duplicates the edge sample: -1 -> 0, n -> n-1.
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}
}  // namespace detail

// Separable Gaussian blur, float accumulation, one rounding at the end.
// Taps are accumulated as symmetric pairs so a horizontal flip of the input
// commutes with the blur bit-for-bit.
inline Image gaussian_blur(const Image& im, double sigma) {
    if (sigma < 0) throw ValidationError("sigma must be nonnegative");
    if (sigma == 0.0) return im;
    auto k = gaussian_kernel(sigma);
    int r = (static_cast<int>(k.size()) - 1) / 2;
    const int h = im.h, w = im.w;
    std::vector<double> tmp(static_cast<size_t>(h) * w), out(static_cast<size_t>(h) * w);
    Image res(h, w);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = k[r] * im.at(y, x, c);
                for (int d = 1; d <= r; ++d) {
                    int xl = detail::reflect_index(x - d, w);
                    int xr = detail::reflect_index(x + d, w);
                    acc += k[r + d] * (static_cast<double>(im.at(y, xl, c)) + im.at(y, xr, c));
                }
                tmp[static_cast<size_t>(y) * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = k[r] * tmp[static_cast<size_t>(y) * w + x];
                for (int d = 1; d <= r; ++d) {
                    int yu = detail::reflect_index(y - d, h);
                    int yd = detail::reflect_index(y + d, h);
                    acc += k[r + d] *
                           (tmp[static_cast<size_t>(yu) * w + x] + tmp[static_cast<size_t>(yd) * w + x]);
                }
                out[static_cast<size_t>(y) * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) res.at(y, x, c) = clamp_u8(out[static_cast<size_t>(y) * w + x]);
    }
    return res;
}

}  // namespace synthdet
