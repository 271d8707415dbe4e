#pragma once

#include <algorithm>
#include <cmath>

#include "synthdet/core/image.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/manifest.hpp"

namespace synthdet {

// Bilinear resize with half-pixel-centered sampling; source coordinates are
// clamped at the borders. This convention is fixed so goldens stay stable.
inline Image resize_bilinear(const Image& im, int oh, int ow) {
    if (oh < 1 || ow < 1) throw ValidationError("resize target must be positive");
    Image out(oh, ow);
    const double sy = static_cast<double>(im.h) / oh;
    const double sx = static_cast<double>(im.w) / ow;
    for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, im.h - 1);
        int y1 = std::min(y0 + 1, im.h - 1);
        double wy = std::clamp(fy - std::floor(fy), 0.0, 1.0);
        if (fy < 0) wy = 0.0;
        for (int x = 0; x < ow; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, im.w - 1);
            int x1 = std::min(x0 + 1, im.w - 1);
            double wx = std::clamp(fx - std::floor(fx), 0.0, 1.0);
            if (fx < 0) wx = 0.0;
            for (int c = 0; c < 3; ++c) {
                double top = im.at(y0, x0, c) * (1 - wx) + im.at(y0, x1, c) * wx;
                double bot = im.at(y1, x0, c) * (1 - wx) + im.at(y1, x1, c) * wx;
                out.at(y, x, c) = clamp_u8(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

inline Image preprocess_image(const Image& im, const PreprocessRule& rule) {
    if (im.h < 1 || im.w < 1) throw ValidationError("empty image");
    switch (rule.mode) {
        case PreprocessMode::keep:
            return im;
        case PreprocessMode::resize_short_side: {
            if (im.h <= im.w) {
                int ow = static_cast<int>(std::lround(static_cast<double>(im.w) * rule.target / im.h));
                return resize_bilinear(im, rule.target, std::max(ow, 1));
            }
            int oh = static_cast<int>(std::lround(static_cast<double>(im.h) * rule.target / im.w));
            return resize_bilinear(im, std::max(oh, 1), rule.target);
        }
        case PreprocessMode::crop_long_then_resize: {
            int side = std::min(im.h, im.w);
            int oy = (im.h - side) / 2;
            int ox = (im.w - side) / 2;
            Image sq(side, side);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    for (int c = 0; c < 3; ++c) sq.at(y, x, c) = im.at(oy + y, ox + x, c);
            return resize_bilinear(sq, rule.target, rule.target);
        }
    }
    throw ValidationError("bad preprocess mode");
}

enum class CropMode { random, center };

inline Image crop_at(const Image& im, int oy, int ox, int size) {
    if (im.h < size || im.w < size)
        throw ValidationError("image " + std::to_string(im.h) + "x" + std::to_string(im.w) +
                              " smaller than crop size " + std::to_string(size));
    Image out(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = im.at(oy + y, ox + x, c);
    return out;
}

// Offsets drawn x first, then y (pinned for reproducibility).
inline std::pair<int, int> sample_crop_offsets(const Image& im, int size, RandomStream& rng) {
    if (im.h < size || im.w < size)
        throw ValidationError("image " + std::to_string(im.h) + "x" + std::to_string(im.w) +
                              " smaller than crop size " + std::to_string(size));
    int ox = static_cast<int>(rng.uniform_int(0, im.w - size));
    int oy = static_cast<int>(rng.uniform_int(0, im.h - size));
    return {oy, ox};
}

inline Image crop(const Image& im, int size, CropMode mode, RandomStream* rng = nullptr) {
    if (mode == CropMode::center) return crop_at(im, (im.h - size) / 2, (im.w - size) / 2, size);
    if (!rng) throw ValidationError("random crop requires a random stream");
    auto [oy, ox] = sample_crop_offsets(im, size, *rng);
    return crop_at(im, oy, ox, size);
}

}  // namespace synthdet
