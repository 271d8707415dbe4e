#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"
#include "synthdet/core/imageio.hpp"
#include "synthdet/corpus/manifest.hpp"
#include "synthdet/corpus/preprocess.hpp"
#include "synthdet/metrics/ap.hpp"
#include "synthdet/metrics/calibrate.hpp"

namespace synthdet::metrics {

enum class ResizeMode { none, resize256 };

inline std::string to_string(ResizeMode m) { return m == ResizeMode::none ? "none" : "resize256"; }

inline ResizeMode resize_mode_from_string(const std::string& s) {
    if (s == "none") return ResizeMode::none;
    if (s == "resize256" || s == "256") return ResizeMode::resize256;
    throw ValidationError("unknown resize mode: " + s);
}

struct EvaluateOptions {
    ResizeMode resize_mode = ResizeMode::none;
    std::optional<CalibrationResult> calibration;
};

struct SourceReport {
    double ap = std::numeric_limits<double>::quiet_NaN();
    std::vector<PRPoint> pr;
    double accuracy_uncalibrated = 0.0;
    double accuracy_oracle = 0.0;
    double oracle_thresh = 0.0;
    std::optional<double> accuracy_two_shot;
    std::map<std::string, double> category_accuracy;
    std::optional<double> category_accuracy_mean;
    int n_real = 0;
    int n_fake = 0;
};

struct EvaluationReport {
    std::map<std::string, SourceReport> sources;
    double map = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> calibration_bias;
    std::vector<std::string> warnings;
    ScoreSet scores;
};

inline double mean_ap(const std::vector<double>& per_source_aps) {
    if (per_source_aps.empty()) throw ValidationError("mean_ap: no per-source APs");
    double acc = 0.0;
    for (double ap : per_source_aps) acc += ap;
    return acc / static_cast<double>(per_source_aps.size());
}

// Aggregates an already-scored set into the per-source/per-category report.
inline EvaluationReport aggregate_scores(const ScoreSet& scores,
                                         const std::optional<CalibrationResult>& calibration) {
    validate_score_set(scores);
    EvaluationReport report;
    report.scores = scores;
    if (calibration) report.calibration_bias = calibration->bias;

    std::map<std::string, std::vector<size_t>> by_source;
    for (size_t i = 0; i < scores.entries.size(); ++i)
        by_source[scores.entries[i].source_id].push_back(i);

    std::vector<double> aps;
    for (const auto& [source, idx] : by_source) {
        SourceReport sr;
        std::vector<double> s;
        std::vector<int> y;
        std::map<std::string, std::pair<long, long>> cat_counts;  // correct, total
        for (size_t i : idx) {
            const auto& e = scores.entries[i];
            s.push_back(e.score);
            y.push_back(e.label);
            if (e.label == 1)
                ++sr.n_fake;
            else
                ++sr.n_real;
            auto& cc = cat_counts[e.category];
            if ((e.score >= 0.0 ? 1 : 0) == e.label) ++cc.first;
            ++cc.second;
        }
        sr.accuracy_uncalibrated = accuracy_at_threshold(s, y, 0.0);
        const OracleThreshold ot = oracle_threshold(s, y);
        sr.oracle_thresh = ot.threshold;
        sr.accuracy_oracle = ot.accuracy;
        if (calibration)
            sr.accuracy_two_shot = accuracy_at_threshold(s, y, -calibration->bias);
        if (sr.n_real > 0 && sr.n_fake > 0) {
            sr.ap = average_precision(s, y);
            sr.pr = pr_curve(s, y);
            aps.push_back(sr.ap);
        } else {
            report.warnings.push_back("source '" + source +
                                      "' has a single class; AP omitted from mAP");
        }
        if (cat_counts.size() > 1) {
            double mean = 0.0;
            for (const auto& [cat, cc] : cat_counts) {
                const double acc = static_cast<double>(cc.first) / static_cast<double>(cc.second);
                sr.category_accuracy[cat] = acc;
                mean += acc;
            }
            sr.category_accuracy_mean = mean / static_cast<double>(cat_counts.size());
        }
        report.sources[source] = std::move(sr);
    }
    if (!aps.empty()) report.map = mean_ap(aps);
    return report;
}

// Hook applied between source preprocessing and the center crop.
using ImageHook = std::function<Image(Image)>;

// Scores every test-split record: preprocess per source rule, optional resize
// to short side 256, the hook if any, center-crop 224, then the scorer.
inline ScoreSet score_test_split(const Scorer& scorer, const DatasetManifest& manifest,
                                 ResizeMode resize_mode, const ImageHook& hook = {},
                                 std::set<std::string>* seen_sources = nullptr) {
    validate_manifest(manifest);
    ScoreSet scores;
    for (const auto& rec : manifest.records) {
        if (rec.split != Split::test) continue;
        if (seen_sources) seen_sources->insert(rec.source_id);
        Image im = read_image(manifest.resolve(rec));
        im = preprocess_image(im, manifest.sources.at(rec.source_id));
        if (resize_mode == ResizeMode::resize256)
            im = preprocess_image(im, {PreprocessMode::resize_short_side, 256});
        if (hook) im = hook(std::move(im));
        im = crop(im, 224, CropMode::center);
        scores.entries.push_back({rec.id, rec.source_id, rec.category,
                                  rec.label == Label::fake ? 1 : 0, scorer(im)});
    }
    if (scores.entries.empty()) throw ValidationError("evaluate: manifest has no test records");
    return scores;
}

inline EvaluationReport evaluate(const Scorer& scorer, const DatasetManifest& manifest,
                                 const EvaluateOptions& options = {}) {
    std::set<std::string> seen_sources;
    ScoreSet scores = score_test_split(scorer, manifest, options.resize_mode, {}, &seen_sources);
    EvaluationReport report = aggregate_scores(scores, options.calibration);
    for (const auto& [source, rule] : manifest.sources)
        if (!seen_sources.count(source))
            report.warnings.push_back("source '" + source + "' has no test records; omitted");
    return report;
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["map"] = std::isnan(r.map) ? nlohmann::json() : nlohmann::json(r.map);
    if (r.calibration_bias) j["calibration_bias"] = *r.calibration_bias;
    j["warnings"] = r.warnings;
    for (const auto& [source, sr] : r.sources) {
        nlohmann::json js;
        js["ap"] = std::isnan(sr.ap) ? nlohmann::json() : nlohmann::json(sr.ap);
        nlohmann::json pr = nlohmann::json::array();
        for (const auto& p : sr.pr) pr.push_back({{"recall", p.recall}, {"precision", p.precision}});
        js["pr_curve"] = pr;
        js["accuracy"] = {{"uncalibrated", sr.accuracy_uncalibrated},
                          {"oracle", sr.accuracy_oracle}};
        js["oracle_threshold"] = sr.oracle_thresh;
        if (sr.accuracy_two_shot) js["accuracy"]["two_shot"] = *sr.accuracy_two_shot;
        if (!sr.category_accuracy.empty()) {
            js["category_accuracy"] = sr.category_accuracy;
            js["category_accuracy_mean"] = *sr.category_accuracy_mean;
        }
        js["counts"] = {{"real", sr.n_real}, {"fake", sr.n_fake}};
        j["sources"][source] = js;
    }
    nlohmann::json se = nlohmann::json::array();
    for (const auto& e : r.scores.entries)
        se.push_back({{"id", e.id},
                      {"source", e.source_id},
                      {"category", e.category},
                      {"label", e.label},
                      {"score", e.score}});
    j["scores"] = se;
    return j;
}

// One pr_<source>.csv per source under dir, ready for plotting.
inline void write_pr_csv(const EvaluationReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [source, sr] : r.sources) {
        std::ofstream f(dir / ("pr_" + source + ".csv"), std::ios::trunc);
        if (!f) throw StageError("cannot write PR curve for source " + source);
        f << "recall,precision\n" << std::setprecision(17);
        for (const auto& p : sr.pr) f << p.recall << "," << p.precision << "\n";
    }
}

}  // namespace synthdet::metrics
