#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synthdet/augment/augment.hpp"

using namespace synthdet;

namespace {

Image noise_image(int h, int w, uint64_t seed) {
    Image im(h, w);
    RandomStream r(seed);
    for (auto& p : im.px) p = static_cast<uint8_t>(r.uniform_int(0, 255));
    return im;
}

double mse(const Image& a, const Image& b) {
    double s = 0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        double d = static_cast<double>(a.px[i]) - b.px[i];
        s += d * d;
    }
    return s / static_cast<double>(a.px.size());
}

}  // namespace

TEST_CASE("blur: sigma zero is identity") {
    Image im = noise_image(32, 32, 1);
    REQUIRE(gaussian_blur(im, 0.0) == im);
}

TEST_CASE("blur: constant image unchanged") {
    Image im = Image::filled(40, 40, 100, 150, 200);
    Image out = gaussian_blur(im, 2.0);
    REQUIRE(out == im);
}

TEST_CASE("blur: impulse response equals the normalized kernel") {
    Image im(9, 9);
    im.at(4, 4, 0) = 255;
    Image out = gaussian_blur(im, 1.0);
    auto k = gaussian_kernel(1.0);
    int r = (static_cast<int>(k.size()) - 1) / 2;
    REQUIRE(r == 3);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) {
            int dy = y - 4, dx = x - 4;
            double expect = 0.0;
            if (std::abs(dy) <= r && std::abs(dx) <= r) expect = 255.0 * k[r + dy] * k[r + dx];
            REQUIRE(static_cast<int>(out.at(y, x, 0)) == static_cast<int>(clamp_u8(expect)));
        }
}

TEST_CASE("blur: kernel sums to one") {
    for (double s : {0.5, 1.0, 2.0, 3.0, 5.0}) {
        auto k = gaussian_kernel(s);
        double sum = std::accumulate(k.begin(), k.end(), 0.0);
        REQUIRE(std::abs(sum - 1.0) < 1e-6);
        // 2-D separable kernel sums to the square of the 1-D sum
        REQUIRE(std::abs(sum * sum - 1.0) < 1e-6);
    }
}

TEST_CASE("blur: commutes with horizontal flip exactly") {
    Image im = noise_image(31, 47, 2);
    for (double s : {0.7, 1.3, 2.9}) {
        Image a = gaussian_blur(flip_horizontal(im), s);
        Image b = flip_horizontal(gaussian_blur(im, s));
        REQUIRE(a == b);
    }
}

TEST_CASE("jpeg: deterministic round trip") {
    Image im = noise_image(64, 48, 3);
    auto codec = default_codec_variants()[0];
    Image a = jpeg_reencode(im, 75, codec);
    Image b = jpeg_reencode(im, 75, codec);
    REQUIRE(a == b);
}

TEST_CASE("jpeg: flat mid-gray survives quality 50") {
    Image im = Image::filled(64, 64, 128, 128, 128);
    for (const auto& codec : default_codec_variants()) {
        Image out = jpeg_reencode(im, 50, codec);
        int maxdev = 0;
        for (size_t i = 0; i < im.px.size(); ++i)
            maxdev = std::max(maxdev, std::abs(static_cast<int>(out.px[i]) - 128));
        REQUIRE(maxdev <= 1);
    }
}

TEST_CASE("jpeg: lower quality distorts more") {
    Image im = noise_image(96, 96, 4);
    auto codec = default_codec_variants()[0];
    REQUIRE(mse(im, jpeg_reencode(im, 30, codec)) >= mse(im, jpeg_reencode(im, 90, codec)));
}

TEST_CASE("jpeg: codec variants differ on textured input") {
    Image im = noise_image(64, 64, 5);
    auto variants = default_codec_variants();
    Image a = jpeg_reencode(im, 80, variants[0]);
    Image b = jpeg_reencode(im, 80, variants[1]);
    REQUIRE_FALSE(a == b);
}

TEST_CASE("jpeg: rejects bad quality") {
    Image im = noise_image(16, 16, 6);
    REQUIRE_THROWS_AS(encode_jpeg(im, 0, default_codec_variants()[0]), ValidationError);
    REQUIRE_THROWS_AS(encode_jpeg(im, 101, default_codec_variants()[0]), ValidationError);
}

TEST_CASE("policy presets") {
    auto p = policy_preset("no_aug");
    REQUIRE(p.blur_prob == 0.0);
    REQUIRE(p.jpeg_prob == 0.0);
    REQUIRE(p.flip_prob == 0.5);
    REQUIRE(policy_preset("blur_only").blur_prob == 0.5);
    REQUIRE(policy_preset("jpeg_only").jpeg_prob == 0.5);
    REQUIRE(policy_preset("blur_jpeg_05").blur_prob == 0.5);
    REQUIRE(policy_preset("blur_jpeg_01").jpeg_prob == 0.1);
    REQUIRE_THROWS_AS(policy_preset("mystery"), ValidationError);
}

TEST_CASE("augment: no_aug applies at most flip and crop") {
    Image im = noise_image(256, 256, 7);
    RandomStream rng(9);
    auto [out, ops] = augment_train(im, policy_preset("no_aug"), rng);
    REQUIRE(out.h == 224);
    REQUIRE(out.w == 224);
    REQUIRE_FALSE(ops.blurred);
    REQUIRE_FALSE(ops.jpegged);
    Image base = ops.flipped ? flip_horizontal(im) : im;
    REQUIRE(out == crop_at(base, ops.crop_y, ops.crop_x, 224));
}

TEST_CASE("augment: fixed seed replays identically") {
    Image im = noise_image(256, 256, 8);
    auto policy = policy_preset("blur_jpeg_05");
    RandomStream a(77), b(77);
    auto [o1, ops1] = augment_train(im, policy, a);
    auto [o2, ops2] = augment_train(im, policy, b);
    REQUIRE(o1 == o2);
    REQUIRE(ops1.sigma == ops2.sigma);
    REQUIRE(ops1.quality == ops2.quality);
    REQUIRE(ops1.codec_variant == ops2.codec_variant);
}

TEST_CASE("augment: AppliedOps reproduces the output") {
    Image im = noise_image(256, 256, 10);
    auto policy = policy_preset("blur_jpeg_05");
    RandomStream rng(123);
    for (int trial = 0; trial < 8; ++trial) {
        auto [out, ops] = augment_train(im, policy, rng);
        Image replay = ops.flipped ? flip_horizontal(im) : im;
        if (ops.blurred) replay = gaussian_blur(replay, ops.sigma);
        if (ops.jpegged) {
            auto variants = policy.encoder_variants;
            auto it = std::find_if(variants.begin(), variants.end(),
                                   [&](const auto& v) { return v.variant_id == ops.codec_variant; });
            REQUIRE(it != variants.end());
            replay = jpeg_reencode(replay, ops.quality, *it);
        }
        REQUIRE(out == crop_at(replay, ops.crop_y, ops.crop_x, 224));
    }
}

TEST_CASE("augment: firing rates over 10k draws") {
    Image im = noise_image(226, 226, 11);  // small margin so crops vary
    RandomStream rng(42);
    int blur05 = 0, jpeg05 = 0;
    auto p05 = policy_preset("blur_jpeg_05");
    // use a cheap stand-in image to keep runtime low: count decisions only
    for (int i = 0; i < 10000; ++i) {
        if (rng.uniform() < p05.flip_prob) {
        }
        if (rng.uniform() < p05.blur_prob) {
            ++blur05;
            rng.uniform(p05.sigma_lo, p05.sigma_hi);
        }
        if (rng.uniform() < p05.jpeg_prob) {
            ++jpeg05;
            rng.uniform_int(p05.quality_lo, p05.quality_hi);
            rng.uniform_int(0, 1);
        }
    }
    REQUIRE(std::abs(blur05 - 5000) <= 150);
    REQUIRE(std::abs(jpeg05 - 5000) <= 150);
}

TEST_CASE("augment: sigma uniformity (KS) and quality coverage") {
    auto p = policy_preset("blur_jpeg_05");
    RandomStream rng(1234);
    std::vector<double> sigmas;
    for (int i = 0; i < 10000; ++i) sigmas.push_back(rng.uniform(p.sigma_lo, p.sigma_hi));
    std::sort(sigmas.begin(), sigmas.end());
    double d = 0;
    size_t n = sigmas.size();
    for (size_t i = 0; i < n; ++i) {
        double f = sigmas[i] / 3.0;
        d = std::max(d, std::max(f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f));
    }
    // 1% critical value for the KS statistic
    REQUIRE(d < 1.628 / std::sqrt(static_cast<double>(n)));

    std::vector<int> counts(101, 0);
    for (int i = 0; i < 50000; ++i) counts[rng.uniform_int(p.quality_lo, p.quality_hi)]++;
    for (int q = 30; q <= 100; ++q) REQUIRE(counts[q] > 0);
    for (int q = 1; q < 30; ++q) REQUIRE(counts[q] == 0);
}
