#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "synthdet/core/errors.hpp"
#include "synthdet/core/image.hpp"
#include "synthdet/core/imageio.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/manifest.hpp"
#include "synthdet/nn/adam.hpp"
#include "synthdet/nn/layers.hpp"
#include "synthdet/nn/loss.hpp"

namespace synthdet::dip {

// Reconstructor topology: fixed noise input, then `stages` rounds of
// 2x nearest upsample + 3x3 conv + leaky relu, a final 3-channel conv, and a
// sigmoid squash to [0,1].
struct DipConfig {
    int stages = 3;
    int width = 16;
    int latent_ch = 8;
    std::vector<double> lr_stages = {0.01, 0.001, 0.0001};
    int iters_per_stage = 2000;
    std::vector<int> snapshot_iters = {1000, 2000, 3000, 4000, 5000, 6000};
    double beta1 = 0.9;
    double beta2 = 0.999;
    uint64_t seed = 0;
};

inline int total_iters(const DipConfig& c) {
    return static_cast<int>(c.lr_stages.size()) * c.iters_per_stage;
}

inline void validate_dip_config(const DipConfig& c) {
    if (c.stages < 1 || c.width < 1 || c.latent_ch < 1)
        throw ValidationError("dip topology fields must be positive");
    if (c.lr_stages.empty()) throw ValidationError("dip needs at least one lr stage");
    for (size_t i = 0; i < c.lr_stages.size(); ++i) {
        if (!(c.lr_stages[i] > 0.0)) throw ValidationError("dip lr must be positive");
        if (i > 0 && c.lr_stages[i] >= c.lr_stages[i - 1])
            throw ValidationError("dip lr stages must be strictly decreasing");
    }
    if (c.iters_per_stage < 1) throw ValidationError("dip iters_per_stage must be >= 1");
    if (c.snapshot_iters.empty()) throw ValidationError("dip needs at least one snapshot iteration");
    for (int k : c.snapshot_iters)
        if (k < 1 || k > total_iters(c))
            throw ValidationError("dip snapshot iteration " + std::to_string(k) +
                                  " outside [1, " + std::to_string(total_iters(c)) + "]");
}

struct DipResult {
    std::string target_id;
    std::map<int, Image> snapshots;     // iteration -> f(theta) at that iteration
    std::vector<double> loss_trace;     // one mean-absolute-error value per iteration
};

namespace detail {

inline nn::Sequential<float> build_reconstructor(const DipConfig& c, RandomStream init_rng) {
    nn::Sequential<float> net;
    int cin = c.latent_ch;
    for (int s = 0; s < c.stages; ++s) {
        net.add<nn::Upsample2x<float>>();
        const int cout = s + 1 == c.stages ? 3 : c.width;
        net.add<nn::Conv2d<float>>(cin, cout, 3, 1, 1);
        if (s + 1 < c.stages) net.add<nn::LeakyReLU<float>>(0.2f);
        cin = cout;
    }
    net.init(init_rng);
    return net;
}

}  // namespace detail

// Fits the seeded reconstructor to one target under mean absolute error with
// the staged decreasing learning rates. Snapshot k is f(theta) as evaluated at
// iteration k, the image whose loss is loss_trace[k-1].
inline DipResult reconstruct_dip(const Image& target, const DipConfig& config,
                                 const std::string& target_id) {
    validate_dip_config(config);
    const int scale = 1 << config.stages;
    if (target.h < scale || target.w < scale || target.h % scale != 0 || target.w % scale != 0)
        throw ValidationError("dip target dimensions must be positive multiples of " +
                              std::to_string(scale));

    RandomStream rng = RandomStream(config.seed).derive(std::string_view("dip"), target_id);
    nn::Sequential<float> net =
        detail::build_reconstructor(config, rng.derive(std::string_view("init")));

    RandomStream noise_rng = rng.derive(std::string_view("noise"));
    nn::Tensor<float> noise(1, config.latent_ch, target.h / scale, target.w / scale);
    for (auto& v : noise.v) v = static_cast<float>(noise_rng.normal());

    std::vector<float> t(static_cast<size_t>(target.h) * target.w * 3);
    for (int y = 0; y < target.h; ++y)
        for (int x = 0; x < target.w; ++x)
            for (int c = 0; c < 3; ++c)
                t[(static_cast<size_t>(c) * target.h + y) * target.w + x] =
                    static_cast<float>(target.at(y, x, c)) / 255.0f;

    std::vector<nn::Param<float>*> params;
    net.collect_params(params);
    nn::Adam<float> adam(params, config.beta1, config.beta2);

    DipResult result;
    result.target_id = target_id;
    std::set<int> wanted(config.snapshot_iters.begin(), config.snapshot_iters.end());
    const size_t n = t.size();

    int iter = 0;
    for (double lr : config.lr_stages) {
        for (int s = 0; s < config.iters_per_stage; ++s) {
            ++iter;
            nn::Tensor<float> z = net.forward(noise, true);
            if (z.c != 3 || z.h != target.h || z.w != target.w)
                throw StageError("dip reconstructor output does not match the target size");
            double loss = 0.0;
            nn::Tensor<float> gz(z.n, z.c, z.h, z.w);
            for (size_t i = 0; i < n; ++i) {
                const double f = 1.0 / (1.0 + std::exp(-static_cast<double>(z.v[i])));
                const double d = f - static_cast<double>(t[i]);
                loss += std::abs(d);
                const double sign = d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0;
                gz.v[i] = static_cast<float>(sign * f * (1.0 - f) / static_cast<double>(n));
            }
            loss /= static_cast<double>(n);
            if (!std::isfinite(loss))
                throw StageError("dip loss became non-finite for target '" + target_id +
                                 "' at iteration " + std::to_string(iter) + " (lr " +
                                 std::to_string(lr) + ", " +
                                 std::to_string(result.loss_trace.size()) +
                                 " finite iterations recorded)");
            result.loss_trace.push_back(loss);
            if (wanted.count(iter)) {
                Image snap(target.h, target.w);
                for (int y = 0; y < target.h; ++y)
                    for (int x = 0; x < target.w; ++x)
                        for (int c = 0; c < 3; ++c) {
                            const double zz = z.at(0, c, y, x);
                            snap.at(y, x, c) = clamp_u8(255.0 / (1.0 + std::exp(-zz)));
                        }
                result.snapshots[iter] = std::move(snap);
            }
            net.backward(gz);
            adam.step(lr);
            adam.zero_grad();
        }
    }
    return result;
}

// Layout: <out>/<target_id>/iter_<k>.png plus loss.csv (iteration,loss).
inline void write_dip_result(const DipResult& result, const std::filesystem::path& out_dir) {
    const std::filesystem::path dir = out_dir / result.target_id;
    std::filesystem::create_directories(dir);
    for (const auto& [k, im] : result.snapshots)
        write_png(dir / ("iter_" + std::to_string(k) + ".png"), im);
    std::ofstream csv(dir / "loss.csv", std::ios::trunc);
    if (!csv) throw StageError("cannot write dip loss trace");
    csv << "iteration,loss\n" << std::setprecision(17);
    for (size_t i = 0; i < result.loss_trace.size(); ++i)
        csv << (i + 1) << "," << result.loss_trace[i] << "\n";
}

// One fake record per (target, snapshot); reals repeated oversample_real times
// so the emitted manifest is balanced for the trainer.
inline DatasetManifest build_dip_dataset(const DatasetManifest& real_manifest,
                                         const DipConfig& config,
                                         const std::filesystem::path& out_dir,
                                         int oversample_real = 6) {
    validate_manifest(real_manifest);
    validate_dip_config(config);
    if (oversample_real < 1) throw ValidationError("oversample_real must be >= 1");
    if (static_cast<size_t>(oversample_real) != config.snapshot_iters.size())
        throw ValidationError("oversample_real must equal the snapshot count to stay balanced");

    std::vector<const ImageRecord*> targets;
    for (const auto& rec : real_manifest.records)
        if (rec.label == Label::real) targets.push_back(&rec);
    if (targets.empty()) throw ValidationError("dip dataset needs at least one real target");

    std::filesystem::create_directories(out_dir);
    DatasetManifest m;
    m.dir = out_dir;
    m.sources["dip"] = PreprocessRule{PreprocessMode::keep, 256};
    m.balanced = true;
    m.metadata = "dip dataset seed=" + std::to_string(config.seed) + " targets=" +
                 std::to_string(targets.size());

    for (const ImageRecord* rec : targets) {
        Image target = read_image(real_manifest.resolve(*rec));
        DipResult result = reconstruct_dip(target, config, rec->id);
        write_dip_result(result, out_dir);
        const std::filesystem::path tdir = out_dir / rec->id;
        write_png(tdir / "target.png", target);
        for (const auto& [k, im] : result.snapshots)
            m.records.push_back({rec->id + "_iter_" + std::to_string(k),
                                 rec->id + "/iter_" + std::to_string(k) + ".png", Label::fake,
                                 "dip", rec->id, Split::train});
        for (int r = 0; r < oversample_real; ++r)
            m.records.push_back({rec->id + "_rep" + std::to_string(r), rec->id + "/target.png",
                                 Label::real, "dip", rec->id, Split::train});
    }
    validate_manifest(m);
    save_manifest(m, out_dir / "manifest.jsonl");
    return m;
}

}  // namespace synthdet::dip
