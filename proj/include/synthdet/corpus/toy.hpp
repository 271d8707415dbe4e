#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "synthdet/core/image.hpp"
#include "synthdet/core/imageio.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/manifest.hpp"

namespace synthdet {

enum class ToyKind { decoder_nearest, decoder_bilinear, dead_leaves };

inline const char* to_string(ToyKind k) {
    switch (k) {
        case ToyKind::decoder_nearest: return "decoder_nearest";
        case ToyKind::decoder_bilinear: return "decoder_bilinear";
        default: return "dead_leaves";
    }
}
inline ToyKind toy_kind_from_string(const std::string& s) {
    if (s == "decoder_nearest") return ToyKind::decoder_nearest;
    if (s == "decoder_bilinear") return ToyKind::decoder_bilinear;
    if (s == "dead_leaves") return ToyKind::dead_leaves;
    throw ValidationError("unknown toy kind: " + s);
}

namespace toy {

struct Planes {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;
    Planes(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
    double at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
};

inline Planes upsample_nearest2x(const Planes& in) {
    Planes out(in.c, in.h * 2, in.w * 2);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    return out;
}

inline Planes upsample_bilinear2x(const Planes& in) {
    Planes out(in.c, in.h * 2, in.w * 2);
    auto coords = [](int j, int n, int& i0, int& i1, double& f) {
        double src = (j + 0.5) / 2.0 - 0.5;
        i0 = std::clamp(static_cast<int>(std::floor(src)), 0, n - 1);
        i1 = std::min(i0 + 1, n - 1);
        f = src < 0 ? 0.0 : src - std::floor(src);
    };
    for (int y = 0; y < out.h; ++y) {
        int y0, y1;
        double fy;
        coords(y, in.h, y0, y1, fy);
        for (int x = 0; x < out.w; ++x) {
            int x0, x1;
            double fx;
            coords(x, in.w, x0, x1, fx);
            for (int c = 0; c < in.c; ++c)
                out.at(c, y, x) = (in.at(c, y0, x0) * (1 - fx) + in.at(c, y0, x1) * fx) * (1 - fy) +
                                  (in.at(c, y1, x0) * (1 - fx) + in.at(c, y1, x1) * fx) * fy;
        }
    }
    return out;
}

// 3x3 cross-correlation with zero padding.
inline Planes conv3x3(const Planes& in, const std::vector<double>& w, const std::vector<double>& b, int cout) {
    Planes out(cout, in.h, in.w);
    auto widx = [&](int o, int i, int ky, int kx) { return ((o * in.c + i) * 3 + ky) * 3 + kx; };
    for (int o = 0; o < cout; ++o)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                double acc = b[o];
                for (int i = 0; i < in.c; ++i)
                    for (int ky = 0; ky < 3; ++ky) {
                        int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.w) continue;
                            acc += in.at(i, yy, xx) * w[widx(o, i, ky, kx)];
                        }
                    }
                out.at(o, y, x) = acc;
            }
    return out;
}

// Fixed-weight 3-stage upsampling decoder. Weights, biases, and the affine
// squash calibration are drawn once per instance; every emitted image then
// shares the same deterministic convolutional texture.
class ToyDecoder {
public:
    ToyDecoder(RandomStream rng, bool nearest, int out_size, int latent_ch = 8)
        : nearest_(nearest), out_size_(out_size), latent_ch_(latent_ch) {
        if (out_size % 8 != 0) throw ValidationError("toy decoder size must be divisible by 8");
        int cin = latent_ch_;
        for (int cout : {latent_ch_, latent_ch_, 3}) {
            std::vector<double> w(static_cast<size_t>(cout) * cin * 9);
            double gain = 1.0 / std::sqrt(static_cast<double>(cin) * 9.0);
            for (auto& x : w) x = rng.normal() * gain;
            std::vector<double> b(cout);
            for (auto& x : b) x = rng.normal() * 0.5;
            weights_.push_back(std::move(w));
            biases_.push_back(std::move(b));
            couts_.push_back(cout);
            cin = cout;
        }
        // Calibrate the squash from probe latents so outputs fill the 8-bit range.
        double sum = 0.0, sum2 = 0.0;
        size_t count = 0;
        for (int p = 0; p < 4; ++p) {
            Planes pre = pre_squash(sample_latent(rng));
            for (double x : pre.v) {
                sum += x;
                sum2 += x * x;
                ++count;
            }
        }
        mu_ = sum / static_cast<double>(count);
        sd_ = std::sqrt(std::max(sum2 / static_cast<double>(count) - mu_ * mu_, 0.0)) + 1e-12;
    }

    Image generate(RandomStream& rng) const {
        Planes x = pre_squash(sample_latent(rng));
        Image im(out_size_, out_size_);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < out_size_; ++y)
                for (int xx = 0; xx < out_size_; ++xx) {
                    double z = (x.at(c, y, xx) - mu_) / sd_;
                    im.at(y, xx, c) = clamp_u8(255.0 / (1.0 + std::exp(-z)));
                }
        return im;
    }

private:
    Planes sample_latent(RandomStream& rng) const {
        Planes z(latent_ch_, out_size_ / 8, out_size_ / 8);
        for (auto& x : z.v) x = rng.normal();
        return z;
    }

    Planes pre_squash(Planes x) const {
        for (int k = 0; k < 3; ++k) {
            x = nearest_ ? upsample_nearest2x(x) : upsample_bilinear2x(x);
            x = conv3x3(x, weights_[k], biases_[k], couts_[k]);
            if (k < 2)
                for (auto& v : x.v) v = v > 0 ? v : 0.2 * v;
        }
        return x;
    }

    bool nearest_;
    int out_size_;
    int latent_ch_;
    std::vector<std::vector<double>> weights_, biases_;
    std::vector<int> couts_;
    double mu_ = 0.0, sd_ = 1.0;
};

// Occluding discs with power-law radii and uniform per-disc colors.
inline Image dead_leaves_image(int size, RandomStream& rng, int discs = 120) {
    Image im(size, size);
    uint8_t bg[3];
    for (auto& c : bg) c = static_cast<uint8_t>(rng.uniform_int(0, 255));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) im.at(y, x, c) = bg[c];
    for (int d = 0; d < discs; ++d) {
        double cx = rng.uniform(0.0, static_cast<double>(size));
        double cy = rng.uniform(0.0, static_cast<double>(size));
        double rad = 4.0 / std::sqrt(rng.uniform(0.004, 1.0));
        uint8_t col[3];
        for (auto& c : col) c = static_cast<uint8_t>(rng.uniform_int(0, 255));
        int y0 = std::max(0, static_cast<int>(std::floor(cy - rad)));
        int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + rad)));
        int x0 = std::max(0, static_cast<int>(std::floor(cx - rad)));
        int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + rad)));
        double r2 = rad * rad;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r2)
                    for (int c = 0; c < 3; ++c) im.at(y, x, c) = col[c];
    }
    return im;
}

}  // namespace toy

// Generates a toy corpus on disk. The decoder kinds mimic one generator
// family as a pool of fixed-weight decoder instances (images cycle through
// the pool) and pair every fake with a dead-leaves real, giving a balanced
// manifest; the dead_leaves kind emits reals only.
inline DatasetManifest synth_toy_corpus(const std::filesystem::path& out_dir, ToyKind kind, int n, int size,
                                        uint64_t seed, int instances = 20) {
    if (n < 1) throw ValidationError("toy corpus needs n >= 1");
    if (size < 224) throw ValidationError("toy corpus size must be >= 224");
    if (size % 8 != 0) throw ValidationError("toy corpus size must be divisible by 8");
    std::filesystem::create_directories(out_dir);

    RandomStream root(seed);
    const bool decoder = kind != ToyKind::dead_leaves;
    const std::string source = kind == ToyKind::decoder_nearest   ? "toy_nearest"
                               : kind == ToyKind::decoder_bilinear ? "toy_bilinear"
                                                                   : "dead_leaves";
    DatasetManifest m;
    m.dir = out_dir;
    m.sources[source] = PreprocessRule{PreprocessMode::keep, size};
    m.balanced = decoder;
    m.metadata = std::string("toy corpus kind=") + to_string(kind) + " n=" + std::to_string(n) +
                 " seed=" + std::to_string(seed);

    std::map<int, toy::ToyDecoder> pool;
    auto decoder_for = [&](int k) -> const toy::ToyDecoder& {
        auto it = pool.find(k);
        if (it == pool.end())
            it = pool
                     .emplace(k, toy::ToyDecoder(root.derive(std::string_view("decoder"), static_cast<uint64_t>(k)),
                                                 kind == ToyKind::decoder_nearest, size))
                     .first;
        return it->second;
    };

    char name[32];
    for (int i = 0; i < n; ++i) {
        Split split = i < n * 70 / 100 ? Split::train : i < n * 85 / 100 ? Split::val : Split::test;
        char cat[8];
        std::snprintf(cat, sizeof(cat), "c%02d", i % instances);
        if (decoder) {
            RandomStream frng = root.derive(std::string_view("fake"), static_cast<uint64_t>(i));
            Image fake = decoder_for(i % instances).generate(frng);
            std::snprintf(name, sizeof(name), "fake_%05d.png", i);
            write_png(out_dir / name, fake);
            m.records.push_back({std::string(name, 10), name, Label::fake, source, cat, split});
        }
        RandomStream rrng = root.derive(std::string_view("real"), static_cast<uint64_t>(i));
        Image real = toy::dead_leaves_image(size, rrng);
        std::snprintf(name, sizeof(name), "real_%05d.png", i);
        write_png(out_dir / name, real);
        m.records.push_back({std::string(name, 10), name, Label::real, source, decoder ? cat : "dl", split});
    }
    validate_manifest(m);
    save_manifest(m, out_dir / "manifest.jsonl");
    return m;
}

}  // namespace synthdet
