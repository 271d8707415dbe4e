#pragma once

#include <memory>
#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"
#include "synthdet/core/hash.hpp"
#include "synthdet/core/image.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/nn/layers.hpp"

namespace synthdet::detector {

struct BackboneSpec {
    std::string architecture_id = "resnet50";
    bool pretrained = true;  // selects the ImageNet input normalization convention
    int input_size = 224;
};

struct DetectorModel {
    BackboneSpec spec;
    std::unique_ptr<nn::Sequential<float>> net;
    double calibration_bias = 0.0;

    std::vector<nn::Param<float>*> params() const {
        std::vector<nn::Param<float>*> out;
        net->collect_params(out);
        return out;
    }

    std::vector<std::vector<float>*> buffers() const {
        std::vector<std::vector<float>*> out;
        net->collect_buffers(out);
        return out;
    }
};

inline std::vector<std::vector<float>> snapshot_weights(const DetectorModel& m) {
    std::vector<std::vector<float>> snap;
    for (auto* p : m.params()) snap.push_back(p->w);
    for (auto* b : m.buffers()) snap.push_back(*b);
    return snap;
}

inline void restore_weights(DetectorModel& m, const std::vector<std::vector<float>>& snap) {
    const auto params = m.params();
    const auto buffers = m.buffers();
    if (snap.size() != params.size() + buffers.size())
        throw StageError("weight snapshot does not match the model layout");
    size_t i = 0;
    for (auto* p : params) {
        if (snap[i].size() != p->w.size()) throw StageError("weight snapshot shape mismatch");
        p->w = snap[i++];
    }
    for (auto* b : buffers) {
        if (snap[i].size() != b->size()) throw StageError("buffer snapshot shape mismatch");
        *b = snap[i++];
    }
}

namespace detail {

inline std::unique_ptr<nn::Layer<float>> bottleneck(int cin, int mid, int cout, int stride) {
    auto main = std::make_unique<nn::Sequential<float>>();
    main->add<nn::Conv2d<float>>(cin, mid, 1, 1, 0);
    main->add<nn::BatchNorm2d<float>>(mid);
    main->add<nn::ReLU<float>>();
    main->add<nn::Conv2d<float>>(mid, mid, 3, stride, 1);
    main->add<nn::BatchNorm2d<float>>(mid);
    main->add<nn::ReLU<float>>();
    main->add<nn::Conv2d<float>>(mid, cout, 1, 1, 0);
    main->add<nn::BatchNorm2d<float>>(cout);
    std::unique_ptr<nn::Layer<float>> shortcut;
    if (cin != cout || stride != 1) {
        auto proj = std::make_unique<nn::Sequential<float>>();
        proj->add<nn::Conv2d<float>>(cin, cout, 1, stride, 0);
        proj->add<nn::BatchNorm2d<float>>(cout);
        shortcut = std::move(proj);
    }
    return std::make_unique<nn::ResidualBlock<float>>(std::move(main), std::move(shortcut));
}

inline std::unique_ptr<nn::Sequential<float>> build_tiny_cnn() {
    auto net = std::make_unique<nn::Sequential<float>>();
    net->add<nn::Conv2d<float>>(3, 16, 4, 4, 0);
    net->add<nn::ReLU<float>>();
    net->add<nn::Conv2d<float>>(16, 32, 3, 2, 1);
    net->add<nn::ReLU<float>>();
    net->add<nn::Conv2d<float>>(32, 64, 3, 2, 1);
    net->add<nn::ReLU<float>>();
    net->add<nn::GlobalAvgPool<float>>();
    net->add<nn::Linear<float>>(64, 1, true);
    return net;
}

inline std::unique_ptr<nn::Sequential<float>> build_resnet50() {
    auto net = std::make_unique<nn::Sequential<float>>();
    net->add<nn::Conv2d<float>>(3, 64, 7, 2, 3);
    net->add<nn::BatchNorm2d<float>>(64);
    net->add<nn::ReLU<float>>();
    net->add<nn::MaxPool2d<float>>(3, 2, 1);
    const int blocks[4] = {3, 4, 6, 3};
    int cin = 64;
    for (int stage = 0; stage < 4; ++stage) {
        const int mid = 64 << stage;
        const int cout = mid * 4;
        for (int b = 0; b < blocks[stage]; ++b) {
            const int stride = (b == 0 && stage > 0) ? 2 : 1;
            net->push(bottleneck(cin, mid, cout, stride));
            cin = cout;
        }
    }
    net->add<nn::GlobalAvgPool<float>>();
    net->add<nn::Linear<float>>(2048, 1, true);
    return net;
}

}  // namespace detail

inline DetectorModel build_model(const BackboneSpec& spec, uint64_t seed) {
    DetectorModel m;
    m.spec = spec;
    if (spec.input_size <= 0) throw ValidationError("input_size must be positive");
    if (spec.architecture_id == "tiny_cnn")
        m.net = detail::build_tiny_cnn();
    else if (spec.architecture_id == "resnet50")
        m.net = detail::build_resnet50();
    else
        throw ValidationError("unknown architecture_id: " + spec.architecture_id);
    RandomStream rng(hash_combine(mix64(seed), std::string_view("init"), spec.architecture_id));
    m.net->init(rng);
    return m;
}

// Pretrained backbones expect ImageNet-normalized inputs; scratch models take [0,1].
inline nn::Tensor<float> to_input_tensor(const std::vector<Image>& images, const BackboneSpec& spec) {
    if (images.empty()) throw ValidationError("empty image batch");
    const int s = spec.input_size;
    for (const auto& im : images)
        if (im.h != s || im.w != s)
            throw ValidationError("image batch shape mismatch: expected " + std::to_string(s) +
                                  "x" + std::to_string(s));
    static const float kMean[3] = {0.485f, 0.456f, 0.406f};
    static const float kStd[3] = {0.229f, 0.224f, 0.225f};
    nn::Tensor<float> t(static_cast<int>(images.size()), 3, s, s);
    for (size_t i = 0; i < images.size(); ++i)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    float v = static_cast<float>(images[i].at(y, x, c)) / 255.0f;
                    if (spec.pretrained) v = (v - kMean[c]) / kStd[c];
                    t.at(static_cast<int>(i), c, y, x) = v;
                }
    return t;
}

inline std::vector<double> score(const DetectorModel& model, const std::vector<Image>& images) {
    nn::Tensor<float> x = to_input_tensor(images, model.spec);
    nn::Tensor<float> logits = model.net->forward(x, false);
    if (logits.size() != images.size()) throw StageError("model head did not emit one logit per image");
    std::vector<double> out(logits.v.begin(), logits.v.end());
    return out;
}

inline double calibrated_probability(const DetectorModel& model, double logit) {
    const double z = logit + model.calibration_bias;
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace synthdet::detector
