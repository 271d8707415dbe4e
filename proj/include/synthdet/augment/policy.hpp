#pragma once

#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"

namespace synthdet {

enum class ChromaSubsampling { s420, s444 };
enum class QuantizationFlavor { islow, ifast };

struct JpegCodecConfig {
    std::string variant_id;
    ChromaSubsampling chroma = ChromaSubsampling::s420;
    QuantizationFlavor flavor = QuantizationFlavor::islow;
};

struct AugmentationPolicy {
    double flip_prob = 0.5;
    double blur_prob = 0.0;
    double sigma_lo = 0.0;
    double sigma_hi = 3.0;
    double jpeg_prob = 0.0;
    int quality_lo = 30;
    int quality_hi = 100;
    std::vector<JpegCodecConfig> encoder_variants;
    int crop_size = 224;
};

inline void validate_policy(const AugmentationPolicy& p) {
    auto prob_ok = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!prob_ok(p.flip_prob) || !prob_ok(p.blur_prob) || !prob_ok(p.jpeg_prob))
        throw ValidationError("augmentation probabilities must be in [0,1]");
    if (p.sigma_lo < 0.0 || p.sigma_hi < p.sigma_lo) throw ValidationError("bad sigma range");
    if (p.quality_lo < 1 || p.quality_hi > 100 || p.quality_hi < p.quality_lo)
        throw ValidationError("jpeg quality range must lie within [1,100]");
    if (p.encoder_variants.empty()) throw ValidationError("policy needs at least one encoder variant");
    if (p.crop_size < 1) throw ValidationError("bad crop size");
    for (size_t i = 0; i < p.encoder_variants.size(); ++i)
        for (size_t j = i + 1; j < p.encoder_variants.size(); ++j)
            if (p.encoder_variants[i].variant_id == p.encoder_variants[j].variant_id)
                throw ValidationError("duplicate encoder variant id: " + p.encoder_variants[i].variant_id);
}

inline std::vector<JpegCodecConfig> default_codec_variants() {
    return {{"islow_420", ChromaSubsampling::s420, QuantizationFlavor::islow},
            {"ifast_444", ChromaSubsampling::s444, QuantizationFlavor::ifast}};
}

inline AugmentationPolicy policy_preset(const std::string& name) {
    AugmentationPolicy p;
    p.encoder_variants = default_codec_variants();
    if (name == "no_aug") {
        // flip only
    } else if (name == "blur_only") {
        p.blur_prob = 0.5;
    } else if (name == "jpeg_only") {
        p.jpeg_prob = 0.5;
    } else if (name == "blur_jpeg_05") {
        p.blur_prob = 0.5;
        p.jpeg_prob = 0.5;
    } else if (name == "blur_jpeg_01") {
        p.blur_prob = 0.1;
        p.jpeg_prob = 0.1;
    } else {
        throw ValidationError("unknown augmentation preset: " + name);
    }
    validate_policy(p);
    return p;
}

}  // namespace synthdet
