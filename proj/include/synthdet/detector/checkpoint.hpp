#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"
#include "synthdet/detector/model.hpp"
#include "synthdet/detector/schedule.hpp"

namespace synthdet::detector {

struct CheckpointMeta {
    std::string policy_preset;
    std::string manifest_hash;
    TrainSchedule schedule;
};

namespace detail {

inline nlohmann::json schedule_to_json(const TrainSchedule& s) {
    return {{"beta1", s.beta1},
            {"beta2", s.beta2},
            {"batch_size", s.batch_size},
            {"lr_initial", s.lr_initial},
            {"drop_factor", s.drop_factor},
            {"plateau_patience", s.plateau_patience},
            {"plateau_threshold", s.plateau_threshold},
            {"lr_min", s.lr_min},
            {"max_epochs", s.max_epochs}};
}

inline TrainSchedule schedule_from_json(const nlohmann::json& j) {
    TrainSchedule s;
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.batch_size = j.at("batch_size").get<int>();
    s.lr_initial = j.at("lr_initial").get<double>();
    s.drop_factor = j.at("drop_factor").get<double>();
    s.plateau_patience = j.at("plateau_patience").get<int>();
    s.plateau_threshold = j.at("plateau_threshold").get<double>();
    s.lr_min = j.at("lr_min").get<double>();
    s.max_epochs = j.at("max_epochs").get<int>();
    return s;
}

}  // namespace detail

// Single-file container: one compact JSON metadata line, then the raw float32
// little-endian weight blobs (parameters first, then buffers, in layer order).
inline void save_checkpoint(const DetectorModel& model, const CheckpointMeta& meta,
                            const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "synthdet-checkpoint-v1";
    j["architecture_id"] = model.spec.architecture_id;
    j["pretrained"] = model.spec.pretrained;
    j["input_size"] = model.spec.input_size;
    j["calibration_bias"] = model.calibration_bias;
    j["schedule"] = detail::schedule_to_json(meta.schedule);
    j["policy_preset"] = meta.policy_preset;
    j["manifest_hash"] = meta.manifest_hash;
    j["regularization"] = "none";
    std::vector<size_t> sizes;
    for (auto* p : model.params()) sizes.push_back(p->w.size());
    for (auto* b : model.buffers()) sizes.push_back(b->size());
    j["weight_blobs"] = sizes;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw StageError("cannot write checkpoint: " + path.string());
    f << j.dump() << "\n";
    auto write_blob = [&](const std::vector<float>& w) {
        f.write(reinterpret_cast<const char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(float)));
    };
    for (auto* p : model.params()) write_blob(p->w);
    for (auto* b : model.buffers()) write_blob(*b);
    if (!f) throw StageError("checkpoint write failed: " + path.string());
}

inline DetectorModel load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open checkpoint: " + path.string());
    std::string header;
    if (!std::getline(f, header)) throw ValidationError("checkpoint missing metadata line: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint metadata parse error: " + std::string(e.what()));
    }
    if (j.value("format", "") != "synthdet-checkpoint-v1")
        throw ValidationError("unrecognized checkpoint format in " + path.string());

    BackboneSpec spec;
    spec.architecture_id = j.at("architecture_id").get<std::string>();
    spec.pretrained = j.at("pretrained").get<bool>();
    spec.input_size = j.at("input_size").get<int>();
    DetectorModel model = build_model(spec, 0);
    model.calibration_bias = j.at("calibration_bias").get<double>();

    const auto sizes = j.at("weight_blobs").get<std::vector<size_t>>();
    std::vector<std::vector<float>> snap;
    for (size_t n : sizes) {
        std::vector<float> w(n);
        f.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (!f) throw ValidationError("checkpoint weight blob truncated: " + path.string());
        snap.push_back(std::move(w));
    }
    restore_weights(model, snap);

    if (meta_out) {
        meta_out->policy_preset = j.value("policy_preset", "");
        meta_out->manifest_hash = j.value("manifest_hash", "");
        meta_out->schedule = detail::schedule_from_json(j.at("schedule"));
    }
    return model;
}

}  // namespace synthdet::detector
