#pragma once

#include <string>

#include "synthdet/augment/blur.hpp"
#include "synthdet/augment/jpeg.hpp"
#include "synthdet/augment/policy.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/preprocess.hpp"

namespace synthdet {

// Audit record of the ops applied to one training sample. Together with the
// input image it fully determines the augmented output.
struct AppliedOps {
    bool flipped = false;
    bool blurred = false;
    double sigma = 0.0;
    bool jpegged = false;
    int quality = 0;
    std::string codec_variant;
    int crop_x = 0;
    int crop_y = 0;
};

// Training pipeline: flip -> blur -> JPEG -> random crop. Decision draws
// always consume the stream (parameter draws only when the op fires), so a
// fixed seed replays identically for any policy.
inline std::pair<Image, AppliedOps> augment_train(const Image& input, const AugmentationPolicy& policy,
                                                  RandomStream& rng) {
    validate_policy(policy);
    AppliedOps ops;
    Image im = input;
    if (rng.uniform() < policy.flip_prob) {
        im = flip_horizontal(im);
        ops.flipped = true;
    }
    if (rng.uniform() < policy.blur_prob) {
        ops.blurred = true;
        ops.sigma = rng.uniform(policy.sigma_lo, policy.sigma_hi);
        im = gaussian_blur(im, ops.sigma);
    }
    if (rng.uniform() < policy.jpeg_prob) {
        ops.jpegged = true;
        ops.quality = static_cast<int>(rng.uniform_int(policy.quality_lo, policy.quality_hi));
        size_t vi = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(policy.encoder_variants.size()) - 1));
        ops.codec_variant = policy.encoder_variants[vi].variant_id;
        im = jpeg_reencode(im, ops.quality, policy.encoder_variants[vi]);
    }
    auto [oy, ox] = sample_crop_offsets(im, policy.crop_size, rng);
    ops.crop_y = oy;
    ops.crop_x = ox;
    return {crop_at(im, oy, ox, policy.crop_size), ops};
}

}  // namespace synthdet
