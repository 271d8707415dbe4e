#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "synthdet/core/errors.hpp"

namespace synthdet {

// Interleaved 8-bit RGB image, row-major.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> px;  // size h*w*3

    Image() = default;
    Image(int height, int width) : h(height), w(width), px(static_cast<size_t>(height) * width * 3, 0) {}

    uint8_t& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    uint8_t at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    bool empty() const { return px.empty(); }

    static Image filled(int h, int w, uint8_t r, uint8_t g, uint8_t b) {
        Image im(h, w);
        for (size_t i = 0; i < im.px.size(); i += 3) {
            im.px[i] = r;
            im.px[i + 1] = g;
            im.px[i + 2] = b;
        }
        return im;
    }
};

inline bool operator==(const Image& a, const Image& b) {
    return a.h == b.h && a.w == b.w && a.px == b.px;
}

inline Image flip_horizontal(const Image& im) {
    Image out(im.h, im.w);
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = im.at(y, im.w - 1 - x, c);
    return out;
}

inline uint8_t clamp_u8(double v) {
    double r = std::nearbyint(v);
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return static_cast<uint8_t>(r);
}

}  // namespace synthdet
