#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthdet/core/errors.hpp"

namespace synthdet {

enum class Label { real, fake };
enum class Split { train, val, test };
enum class PreprocessMode { keep, resize_short_side, crop_long_then_resize };

inline const char* to_string(Label l) { return l == Label::real ? "real" : "fake"; }
inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}
inline const char* to_string(PreprocessMode m) {
    switch (m) {
        case PreprocessMode::keep: return "keep";
        case PreprocessMode::resize_short_side: return "resize_short_side";
        default: return "crop_long_then_resize";
    }
}

inline Label label_from_string(const std::string& s) {
    if (s == "real") return Label::real;
    if (s == "fake") return Label::fake;
    throw ValidationError("unknown label: " + s);
}
inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split: " + s);
}
inline PreprocessMode mode_from_string(const std::string& s) {
    if (s == "keep") return PreprocessMode::keep;
    if (s == "resize_short_side") return PreprocessMode::resize_short_side;
    if (s == "crop_long_then_resize") return PreprocessMode::crop_long_then_resize;
    throw ValidationError("unknown preprocess mode: " + s);
}

struct ImageRecord {
    std::string id;
    std::string path;  // relative to the manifest directory
    Label label = Label::real;
    std::string source_id;
    std::string category;
    Split split = Split::train;
};

struct PreprocessRule {
    PreprocessMode mode = PreprocessMode::keep;
    int target = 256;
};

struct DatasetManifest {
    std::vector<ImageRecord> records;
    std::map<std::string, PreprocessRule> sources;
    bool balanced = false;
    std::string metadata;
    std::filesystem::path dir;  // base for relative record paths; not serialized

    std::filesystem::path resolve(const ImageRecord& rec) const { return dir / rec.path; }
};

inline void validate_manifest(const DatasetManifest& m) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : m.records) {
        if (!m.sources.count(r.source_id))
            throw ValidationError("record '" + r.id + "': unknown source_id '" + r.source_id + "'");
        if (!seen.insert({r.source_id, r.id}).second)
            throw ValidationError("duplicate record id '" + r.id + "' in source '" + r.source_id + "'");
    }
    if (m.balanced) {
        std::map<std::pair<std::string, Split>, std::pair<int, int>> counts;  // real, fake
        for (const auto& r : m.records) {
            auto& c = counts[{r.source_id, r.split}];
            (r.label == Label::real ? c.first : c.second)++;
        }
        for (const auto& [key, c] : counts) {
            if (c.first != c.second)
                throw ValidationError("balanced group violated: source '" + key.first + "' split '" +
                                      to_string(key.second) + "' has " + std::to_string(c.first) + " real vs " +
                                      std::to_string(c.second) + " fake records");
        }
    }
    for (const auto& [id, rule] : m.sources)
        if (rule.target <= 0) throw ValidationError("source '" + id + "': target must be positive");
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open manifest: " + path.string());
    DatasetManifest m;
    m.dir = path.parent_path();
    std::string line;
    size_t lineno = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            if (!have_header) {
                have_header = true;
                for (auto it = j.at("sources").begin(); it != j.at("sources").end(); ++it) {
                    PreprocessRule rule;
                    rule.mode = mode_from_string(it.value().at("mode").get<std::string>());
                    rule.target = it.value().value("target", 256);
                    m.sources[it.key()] = rule;
                }
                m.balanced = j.value("balanced", false);
                m.metadata = j.value("metadata", std::string());
            } else {
                ImageRecord r;
                r.id = j.at("id").get<std::string>();
                r.path = j.at("path").get<std::string>();
                r.label = label_from_string(j.at("label").get<std::string>());
                r.source_id = j.at("source_id").get<std::string>();
                r.category = j.at("category").get<std::string>();
                r.split = split_from_string(j.at("split").get<std::string>());
                m.records.push_back(std::move(r));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw ValidationError("manifest missing header line: " + path.string());
    validate_manifest(m);
    return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw StageError("cannot write manifest: " + path.string());
    nlohmann::json srcs = nlohmann::json::object();
    for (const auto& [id, rule] : m.sources) srcs[id] = {{"mode", to_string(rule.mode)}, {"target", rule.target}};
    nlohmann::json header = {{"sources", srcs}, {"balanced", m.balanced}, {"metadata", m.metadata}};
    f << header.dump() << "\n";
    for (const auto& r : m.records) {
        nlohmann::json j = {{"id", r.id},          {"path", r.path},       {"label", to_string(r.label)},
                            {"source_id", r.source_id}, {"category", r.category}, {"split", to_string(r.split)}};
        f << j.dump() << "\n";
    }
    if (!f) throw StageError("manifest write failed: " + path.string());
}

}  // namespace synthdet
