#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "synthdet/augment/policy.hpp"
#include "synthdet/core/imageio.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/toy.hpp"
#include "synthdet/detector/checkpoint.hpp"
#include "synthdet/detector/model.hpp"
#include "synthdet/detector/schedule.hpp"
#include "synthdet/detector/train.hpp"
#include "synthdet/metrics/ap.hpp"

using namespace synthdet;
namespace fs = std::filesystem;

namespace {

std::vector<Image> chance_batch(int n, uint64_t seed) {
    RandomStream rng(seed);
    std::vector<Image> images;
    for (int i = 0; i < n / 2; ++i) images.push_back(toy::dead_leaves_image(224, rng));
    for (int i = 0; i < n - n / 2; ++i) {
        Image im(224, 224);
        for (auto& p : im.px) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
        images.push_back(im);
    }
    return images;
}

detector::TrainSchedule desk_schedule(int max_epochs, int batch = 8) {
    detector::TrainSchedule s;
    s.batch_size = batch;
    s.lr_initial = 1e-3;
    s.plateau_patience = 7;
    s.max_epochs = max_epochs;
    return s;
}

}  // namespace

TEST_CASE("build_model is seed-deterministic and rejects unknown architectures") {
    detector::BackboneSpec spec{"tiny_cnn", false, 224};
    auto a = detector::build_model(spec, 77);
    auto b = detector::build_model(spec, 77);
    auto c = detector::build_model(spec, 78);
    const auto pa = a.params(), pb = b.params(), pc = c.params();
    REQUIRE(pa.size() == pb.size());
    bool all_equal = true, differs_from_c = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->w != pb[i]->w) all_equal = false;
        if (pa[i]->w != pc[i]->w) differs_from_c = true;
    }
    REQUIRE(all_equal);
    REQUIRE(differs_from_c);
    REQUIRE_THROWS_AS(detector::build_model({"vgg_unknown", false, 224}, 1), ValidationError);
}

TEST_CASE("resnet50 emits a single logit per input") {
    auto model = detector::build_model({"resnet50", true, 224}, 5);
    std::vector<Image> batch = {Image::filled(224, 224, 128, 100, 90)};
    const auto logits = detector::score(model, batch);
    REQUIRE(logits.size() == 1);
    REQUIRE(std::isfinite(logits[0]));
}

TEST_CASE("a freshly built model scores balanced data at chance level") {
    auto model = detector::build_model({"tiny_cnn", false, 224}, 9);
    const auto images = chance_batch(500, 901);
    const auto logits = detector::score(model, images);
    for (double z : logits) REQUIRE(z == 0.0);

    std::vector<int> labels(500);
    for (int i = 0; i < 500; ++i) labels[i] = i < 250 ? 0 : 1;
    REQUIRE_THAT(metrics::average_precision(logits, labels),
                 Catch::Matchers::WithinAbs(0.5, 0.1));

    auto params = model.params();
    RandomStream head_rng(44);
    for (auto& w : params[params.size() - 2]->w) w = static_cast<float>(head_rng.normal());
    const auto random_logits = detector::score(model, images);
    REQUIRE_THAT(metrics::average_precision(random_logits, labels),
                 Catch::Matchers::WithinAbs(0.5, 0.1));
}

TEST_CASE("scoring is deterministic and batch-invariant") {
    auto model = detector::build_model({"tiny_cnn", false, 224}, 10);
    auto params = model.params();
    RandomStream head_rng(55);
    for (auto& w : params[params.size() - 2]->w) w = static_cast<float>(head_rng.normal());

    const auto images = chance_batch(64, 77);
    const auto once = detector::score(model, images);
    const auto twice = detector::score(model, images);
    REQUIRE(once == twice);

    for (int i : {0, 17, 63}) {
        const auto single = detector::score(model, {images[static_cast<size_t>(i)]});
        REQUIRE_THAT(single[0], Catch::Matchers::WithinAbs(once[static_cast<size_t>(i)], 1e-5));
    }
}

TEST_CASE("score rejects mis-shaped batches") {
    auto model = detector::build_model({"tiny_cnn", false, 224}, 11);
    REQUIRE_THROWS_AS(detector::score(model, {Image::filled(128, 224, 0, 0, 0)}),
                      ValidationError);
    REQUIRE_THROWS_AS(detector::score(model, {}), ValidationError);
}

TEST_CASE("calibration bias shifts probabilities but never the ranking") {
    auto model = detector::build_model({"tiny_cnn", false, 224}, 12);
    auto params = model.params();
    RandomStream head_rng(66);
    for (auto& w : params[params.size() - 2]->w) w = static_cast<float>(head_rng.normal());
    const auto images = chance_batch(32, 33);
    const auto logits = detector::score(model, images);

    std::vector<size_t> rank0(logits.size());
    std::iota(rank0.begin(), rank0.end(), size_t{0});
    std::stable_sort(rank0.begin(), rank0.end(),
                     [&](size_t a, size_t b) { return logits[a] > logits[b]; });
    for (double bias : {-3.0, 0.0, 1.7}) {
        model.calibration_bias = bias;
        const auto again = detector::score(model, images);
        REQUIRE(again == logits);
        for (size_t i = 0; i < logits.size(); ++i) {
            const double p = detector::calibrated_probability(model, logits[i]);
            const double expect = 1.0 / (1.0 + std::exp(-(logits[i] + bias)));
            REQUIRE_THAT(p, Catch::Matchers::WithinAbs(expect, 1e-12));
        }
        std::vector<size_t> rank(logits.size());
        std::iota(rank.begin(), rank.end(), size_t{0});
        std::stable_sort(rank.begin(), rank.end(),
                         [&](size_t a, size_t b) { return again[a] > again[b]; });
        REQUIRE(rank == rank0);
    }
}

TEST_CASE("plateau scheduler follows the documented examples") {
    detector::TrainSchedule s;

    SECTION("improving trace keeps the initial rate") {
        std::vector<double> trace;
        for (int i = 0; i < 20; ++i) trace.push_back(0.5 + 0.02 * i);
        const auto r = detector::replay_schedule(s, trace);
        REQUIRE(r.drop_epochs.empty());
        REQUIRE(r.stop_epoch == 0);
        for (double lr : r.epoch_lrs) REQUIRE(lr == 1e-4);
    }

    SECTION("flat trace drops to 1e-5 at epoch 6") {
        const std::vector<double> trace(10, 0.7);
        const auto r = detector::replay_schedule(s, trace);
        REQUIRE(r.drop_epochs.size() == 2);
        REQUIRE(r.drop_epochs[0] == 5);
        REQUIRE(r.epoch_lrs[4] == 1e-4);
        REQUIRE_THAT(r.epoch_lrs[5], Catch::Matchers::WithinRel(1e-5, 1e-9));
    }

    SECTION("flat trace at lr_min terminates") {
        detector::TrainSchedule tiny = s;
        tiny.lr_initial = 1e-6;
        const auto r = detector::replay_schedule(tiny, std::vector<double>(10, 0.7));
        REQUIRE(r.stop_epoch == 5);
        REQUIRE(r.drop_epochs.empty());
    }

    SECTION("full flat run: drops at 5 and 10, stop at 15") {
        const auto r = detector::replay_schedule(s, std::vector<double>(30, 0.6));
        REQUIRE(r.drop_epochs == std::vector<int>{5, 10});
        REQUIRE(r.stop_epoch == 15);
    }

    SECTION("patience presets honored") {
        for (int p : {50, 25, 13, 7}) {
            detector::TrainSchedule sp = s;
            sp.plateau_patience = p;
            const auto r = detector::replay_schedule(sp, std::vector<double>(200, 0.6));
            REQUIRE(r.drop_epochs == std::vector<int>{p, 2 * p});
            REQUIRE(r.stop_epoch == 3 * p);
        }
    }

    SECTION("sub-threshold improvements still count as a plateau") {
        std::vector<double> trace;
        for (int i = 0; i < 30; ++i) trace.push_back(0.5 + 0.0001 * i);
        const auto r = detector::replay_schedule(s, trace);
        REQUIRE(!r.drop_epochs.empty());
        REQUIRE(r.drop_epochs[0] == 5);
    }
}

TEST_CASE("scheduler learning-rate sequence invariants hold on random traces") {
    for (uint64_t seed = 0; seed < 25; ++seed) {
        RandomStream rng(seed + 700);
        detector::TrainSchedule s;
        s.plateau_patience = 1 + static_cast<int>(rng.uniform_int(0, 7));
        std::vector<double> trace;
        for (int i = 0; i < 60; ++i) trace.push_back(rng.uniform());
        const auto r = detector::replay_schedule(s, trace);
        const auto r2 = detector::replay_schedule(s, trace);
        REQUIRE(r.epoch_lrs == r2.epoch_lrs);
        REQUIRE(r.epoch_lrs[0] == s.lr_initial);
        for (size_t i = 1; i < r.epoch_lrs.size(); ++i) {
            REQUIRE(r.epoch_lrs[i] <= r.epoch_lrs[i - 1]);
            if (r.epoch_lrs[i] != r.epoch_lrs[i - 1])
                REQUIRE_THAT(r.epoch_lrs[i] / r.epoch_lrs[i - 1],
                             Catch::Matchers::WithinRel(s.drop_factor, 1e-9));
        }
    }
}

TEST_CASE("scheduler validates its configuration") {
    detector::TrainSchedule s;
    s.drop_factor = 1.5;
    REQUIRE_THROWS_AS(detector::validate_schedule(s), ValidationError);
    s = {};
    s.lr_min = 1.0;
    REQUIRE_THROWS_AS(detector::validate_schedule(s), ValidationError);
    s = {};
    s.plateau_patience = 0;
    REQUIRE_THROWS_AS(detector::validate_schedule(s), ValidationError);
}

TEST_CASE("training runs deterministically on a small toy corpus") {
    const fs::path dir = fs::temp_directory_path() / "synthdet_train_smoke";
    fs::remove_all(dir);
    const auto manifest = synth_toy_corpus(dir, ToyKind::decoder_nearest, 40, 256, 1234, 4);

    const auto policy = policy_preset("no_aug");
    const auto schedule = desk_schedule(3);

    auto m1 = detector::build_model({"tiny_cnn", false, 224}, 42);
    const auto h1 = detector::train(m1, manifest, manifest, policy, schedule, 42);
    auto m2 = detector::build_model({"tiny_cnn", false, 224}, 42);
    const auto h2 = detector::train(m2, manifest, manifest, policy, schedule, 42);

    REQUIRE(h1.total_epochs == 3);
    REQUIRE(h1.termination_reason == "max_epochs");
    REQUIRE(h1.epochs.size() == h2.epochs.size());
    for (size_t i = 0; i < h1.epochs.size(); ++i) {
        REQUIRE(h1.epochs[i].train_loss == h2.epochs[i].train_loss);
        REQUIRE(h1.epochs[i].val_accuracy == h2.epochs[i].val_accuracy);
        REQUIRE(h1.epochs[i].lr == h2.epochs[i].lr);
    }
    REQUIRE(h1.best_epoch >= 1);
    REQUIRE(h1.best_epoch <= 3);

    const auto probe = chance_batch(8, 5);
    REQUIRE(detector::score(m1, probe) == detector::score(m2, probe));

    for (size_t i = 1; i < h1.epochs.size(); ++i) REQUIRE(h1.epochs[i].lr <= h1.epochs[i - 1].lr);
    fs::remove_all(dir);
}

TEST_CASE("training restores the best-validation weights") {
    const fs::path dir = fs::temp_directory_path() / "synthdet_train_best";
    fs::remove_all(dir);
    const auto manifest = synth_toy_corpus(dir, ToyKind::decoder_nearest, 40, 256, 77, 4);

    auto model = detector::build_model({"tiny_cnn", false, 224}, 7);
    const auto history =
        detector::train(model, manifest, manifest, policy_preset("no_aug"), desk_schedule(4), 7);

    double best = -1.0;
    int best_epoch = 0;
    for (size_t i = 0; i < history.epochs.size(); ++i)
        if (history.epochs[i].val_accuracy > best) {
            best = history.epochs[i].val_accuracy;
            best_epoch = static_cast<int>(i) + 1;
        }
    REQUIRE(history.best_epoch == best_epoch);
    REQUIRE(history.best_val_accuracy == best);
    fs::remove_all(dir);
}

TEST_CASE("training rejects invalid splits") {
    const fs::path dir = fs::temp_directory_path() / "synthdet_train_invalid";
    fs::remove_all(dir);
    auto manifest = synth_toy_corpus(dir, ToyKind::decoder_nearest, 20, 256, 5, 2);

    auto model = detector::build_model({"tiny_cnn", false, 224}, 1);
    const auto policy = policy_preset("no_aug");
    const auto schedule = desk_schedule(1);

    auto imbalanced = manifest;
    imbalanced.balanced = false;
    imbalanced.records.erase(
        std::find_if(imbalanced.records.begin(), imbalanced.records.end(), [](const ImageRecord& r) {
            return r.split == Split::train && r.label == Label::fake;
        }));
    REQUIRE_THROWS_AS(detector::train(model, imbalanced, manifest, policy, schedule, 1),
                      ValidationError);

    auto no_train = manifest;
    no_train.records.erase(std::remove_if(no_train.records.begin(), no_train.records.end(),
                                          [](const ImageRecord& r) { return r.split == Split::train; }),
                           no_train.records.end());
    REQUIRE_THROWS_AS(detector::train(model, no_train, manifest, policy, schedule, 1),
                      ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("training aborts on non-finite loss with a diagnostic") {
    const fs::path dir = fs::temp_directory_path() / "synthdet_train_nan";
    fs::remove_all(dir);
    const auto manifest = synth_toy_corpus(dir, ToyKind::decoder_nearest, 8, 256, 3, 2);

    auto model = detector::build_model({"tiny_cnn", false, 224}, 2);
    model.params()[0]->w[0] = std::numeric_limits<float>::infinity();
    REQUIRE_THROWS_AS(
        detector::train(model, manifest, manifest, policy_preset("no_aug"), desk_schedule(1), 2),
        StageError);
    fs::remove_all(dir);
}

TEST_CASE("checkpoints round-trip weights, bias and metadata") {
    const fs::path path = fs::temp_directory_path() / "synthdet_ckpt.bin";
    auto model = detector::build_model({"tiny_cnn", false, 224}, 21);
    auto params = model.params();
    RandomStream rng(91);
    for (auto* p : params)
        for (auto& w : p->w) w = static_cast<float>(rng.normal());
    model.calibration_bias = -0.375;

    detector::CheckpointMeta meta;
    meta.policy_preset = "blur_jpeg_05";
    meta.manifest_hash = "abc123";
    meta.schedule = desk_schedule(16);
    detector::save_checkpoint(model, meta, path);

    detector::CheckpointMeta loaded_meta;
    auto loaded = detector::load_checkpoint(path, &loaded_meta);
    REQUIRE(loaded.spec.architecture_id == "tiny_cnn");
    REQUIRE(loaded.spec.pretrained == false);
    REQUIRE(loaded.calibration_bias == -0.375);
    REQUIRE(loaded_meta.policy_preset == "blur_jpeg_05");
    REQUIRE(loaded_meta.manifest_hash == "abc123");
    REQUIRE(loaded_meta.schedule.batch_size == 8);
    REQUIRE(loaded_meta.schedule.max_epochs == 16);

    const auto images = chance_batch(16, 13);
    REQUIRE(detector::score(loaded, images) == detector::score(model, images));

    REQUIRE_THROWS_AS(detector::load_checkpoint(fs::temp_directory_path() / "missing.bin"),
                      ValidationError);
    fs::remove_all(path);
}
