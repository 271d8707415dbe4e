#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "synthdet/augment/augment.hpp"
#include "synthdet/core/errors.hpp"
#include "synthdet/core/hash.hpp"
#include "synthdet/core/imageio.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/manifest.hpp"
#include "synthdet/corpus/preprocess.hpp"
#include "synthdet/detector/model.hpp"
#include "synthdet/detector/schedule.hpp"
#include "synthdet/nn/adam.hpp"
#include "synthdet/nn/loss.hpp"

namespace synthdet::detector {

struct EpochStats {
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int total_epochs = 0;
    std::string termination_reason;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
};

namespace detail {

inline std::vector<ImageRecord> split_records(const DatasetManifest& m, Split split) {
    std::vector<ImageRecord> out;
    for (const auto& r : m.records)
        if (r.split == split) out.push_back(r);
    return out;
}

inline Image load_preprocessed(const DatasetManifest& m, const ImageRecord& rec) {
    Image im = read_image(m.resolve(rec));
    return preprocess_image(im, m.sources.at(rec.source_id));
}

}  // namespace detail

// Minimizes BCE on the fakeness logit with Adam under the plateau schedule;
// the model ends up with its best-validation-accuracy weights.
inline TrainHistory train(DetectorModel& model, const DatasetManifest& train_manifest,
                          const DatasetManifest& val_manifest, const AugmentationPolicy& policy,
                          const TrainSchedule& schedule, uint64_t seed) {
    validate_policy(policy);
    validate_schedule(schedule);
    validate_manifest(train_manifest);
    validate_manifest(val_manifest);
    if (policy.crop_size != model.spec.input_size)
        throw ValidationError("policy crop_size must match the model input_size");

    const auto train_records = detail::split_records(train_manifest, Split::train);
    const auto val_records = detail::split_records(val_manifest, Split::val);
    if (train_records.empty()) throw ValidationError("train split is empty");
    if (val_records.empty()) throw ValidationError("validation split is empty");
    long n_fake = 0;
    for (const auto& r : train_records)
        if (r.label == Label::fake) ++n_fake;
    if (2 * n_fake != static_cast<long>(train_records.size()))
        throw ValidationError("train split is imbalanced: " +
                              std::to_string(train_records.size() - n_fake) + " real vs " +
                              std::to_string(n_fake) + " fake");

    std::vector<Image> val_images;
    std::vector<int> val_labels;
    for (const auto& r : val_records) {
        Image im = detail::load_preprocessed(val_manifest, r);
        val_images.push_back(crop(im, model.spec.input_size, CropMode::center));
        val_labels.push_back(r.label == Label::fake ? 1 : 0);
    }

    nn::Adam<float> opt(model.params(), schedule.beta1, schedule.beta2);
    PlateauScheduler sched(schedule);
    TrainHistory history;
    std::vector<std::vector<float>> best_snapshot = snapshot_weights(model);
    const uint64_t root = mix64(seed);

    for (int epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
        const double lr = sched.lr();

        std::vector<size_t> order(train_records.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        RandomStream shuffle_rng(hash_combine(root, std::string_view("shuffle"), epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<long>(i) - 1)]);

        double loss_sum = 0.0;
        size_t batch_start = 0;
        while (batch_start < order.size()) {
            const size_t batch_end =
                std::min(batch_start + static_cast<size_t>(schedule.batch_size), order.size());
            std::vector<Image> batch;
            std::vector<float> targets;
            for (size_t k = batch_start; k < batch_end; ++k) {
                const auto& rec = train_records[order[k]];
                Image im = detail::load_preprocessed(train_manifest, rec);
                RandomStream aug_rng(hash_combine(root, std::string_view("aug"), epoch,
                                                  rec.source_id, rec.id));
                batch.push_back(augment_train(im, policy, aug_rng).first);
                targets.push_back(rec.label == Label::fake ? 1.0f : 0.0f);
            }
            nn::Tensor<float> x = to_input_tensor(batch, model.spec);
            nn::Tensor<float> logits = model.net->forward(x, true);
            nn::Tensor<float> grad;
            const double loss = nn::bce_with_logits(logits, targets, grad);
            if (!std::isfinite(loss))
                throw StageError("non-finite training loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at " + std::to_string(batch_start) +
                                 " (lr=" + std::to_string(lr) + ")");
            opt.zero_grad();
            model.net->backward(grad);
            opt.step(lr);
            loss_sum += loss * static_cast<double>(batch.size());
            batch_start = batch_end;
        }

        long correct = 0;
        size_t v = 0;
        while (v < val_images.size()) {
            const size_t ve = std::min(v + static_cast<size_t>(schedule.batch_size),
                                       val_images.size());
            std::vector<Image> vb(val_images.begin() + v, val_images.begin() + ve);
            const auto logits = score(model, vb);
            for (size_t k = 0; k < logits.size(); ++k) {
                const int pred = logits[k] >= 0.0 ? 1 : 0;
                if (pred == val_labels[v + k]) ++correct;
            }
            v = ve;
        }
        const double val_acc = static_cast<double>(correct) / static_cast<double>(val_images.size());

        history.epochs.push_back(
            {loss_sum / static_cast<double>(train_records.size()), val_acc, lr});
        if (val_acc > history.best_val_accuracy || history.best_epoch == 0) {
            history.best_val_accuracy = val_acc;
            history.best_epoch = epoch;
            best_snapshot = snapshot_weights(model);
        }

        const auto action = sched.observe(val_acc);
        if (action == PlateauScheduler::Action::stop) {
            history.termination_reason = "plateau_at_lr_min";
            break;
        }
        if (epoch == schedule.max_epochs) history.termination_reason = "max_epochs";
    }

    history.total_epochs = static_cast<int>(history.epochs.size());
    restore_weights(model, best_snapshot);
    return history;
}

}  // namespace synthdet::detector
