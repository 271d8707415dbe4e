#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "synthdet/detector/model.hpp"
#include "synthdet/metrics/evaluate.hpp"

namespace synthdet::harness {

struct RankEntry {
    std::string id;
    std::string path;        // relative to the manifest directory
    double score = 0.0;
    double percentile = 0.0;
    size_t rank = 0;         // 0-indexed position in the ascending ordering
};

struct RankGallery {
    std::vector<double> percentiles;
    std::map<std::string, std::vector<RankEntry>> fakes;     // per source
    std::map<std::string, std::vector<RankEntry>> combined;  // per source, reals interleaved
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<RankEntry> pick_percentiles(std::vector<RankEntry> pool,
                                               const std::vector<double>& percentiles) {
    std::sort(pool.begin(), pool.end(), [](const RankEntry& a, const RankEntry& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.id < b.id;
    });
    std::vector<RankEntry> out;
    const size_t n = pool.size();
    for (double p : percentiles) {
        const size_t r = static_cast<size_t>(std::floor(p / 100.0 * static_cast<double>(n - 1)));
        RankEntry e = pool[r];
        e.percentile = p;
        e.rank = r;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace detail

// Per source, fakes ascending by score (ties by record id); the entry at rank
// floor(p/100*(n-1)) represents percentile p. include_reals adds a combined
// real+fake ranking per source.
inline RankGallery rank_images(const metrics::Scorer& scorer, const DatasetManifest& manifest,
                               const std::vector<double>& percentiles = {0, 25, 50, 75, 100},
                               bool include_reals = false,
                               metrics::ResizeMode resize_mode = metrics::ResizeMode::none) {
    if (percentiles.empty()) throw ValidationError("rank_images: no percentiles requested");
    for (double p : percentiles)
        if (!(p >= 0.0 && p <= 100.0))
            throw ValidationError("rank_images: percentile outside [0,100]");

    metrics::ScoreSet scores = metrics::score_test_split(scorer, manifest, resize_mode);
    std::map<std::pair<std::string, std::string>, std::string> paths;
    for (const auto& rec : manifest.records) paths[{rec.source_id, rec.id}] = rec.path;

    std::map<std::string, std::vector<RankEntry>> fake_pool, all_pool;
    for (const auto& e : scores.entries) {
        RankEntry r{e.id, paths.at({e.source_id, e.id}), e.score, 0.0, 0};
        if (e.label == 1) fake_pool[e.source_id].push_back(r);
        if (include_reals) all_pool[e.source_id].push_back(r);
    }

    RankGallery g;
    g.percentiles = percentiles;
    std::set<std::string> sources;
    for (const auto& e : scores.entries) sources.insert(e.source_id);
    for (const auto& source : sources) {
        auto it = fake_pool.find(source);
        if (it == fake_pool.end() || it->second.empty()) {
            g.warnings.push_back("source '" + source + "' has no fake images; omitted from ranking");
            continue;
        }
        g.fakes[source] = detail::pick_percentiles(it->second, percentiles);
        if (include_reals) g.combined[source] = detail::pick_percentiles(all_pool[source], percentiles);
    }
    return g;
}

inline RankGallery rank_images(const detector::DetectorModel& model, const DatasetManifest& manifest,
                               const std::vector<double>& percentiles = {0, 25, 50, 75, 100},
                               bool include_reals = false,
                               metrics::ResizeMode resize_mode = metrics::ResizeMode::none) {
    metrics::Scorer scorer = [&model](const Image& im) { return detector::score(model, {im})[0]; };
    return rank_images(scorer, manifest, percentiles, include_reals, resize_mode);
}

inline nlohmann::json gallery_to_json(const RankGallery& g) {
    nlohmann::json j;
    j["percentiles"] = g.percentiles;
    j["warnings"] = g.warnings;
    auto block = [](const std::map<std::string, std::vector<RankEntry>>& m) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [source, entries] : m) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& e : entries)
                arr.push_back({{"id", e.id},
                               {"path", e.path},
                               {"score", e.score},
                               {"percentile", e.percentile},
                               {"rank", e.rank}});
            out[source] = arr;
        }
        return out;
    };
    j["fakes"] = block(g.fakes);
    if (!g.combined.empty()) j["combined"] = block(g.combined);
    return j;
}

// Self-contained gallery: copies the selected images next to the index so the
// HTML needs nothing outside out_dir.
inline void write_gallery(const RankGallery& g, const DatasetManifest& manifest,
                          const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json index = gallery_to_json(g);

    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
         << "<title>fakeness ranking</title></head>\n<body>\n";
    auto section = [&](const std::string& title,
                       const std::map<std::string, std::vector<RankEntry>>& block,
                       const std::string& tag) {
        if (block.empty()) return;
        html << "<h1>" << title << "</h1>\n";
        for (const auto& [source, entries] : block) {
            html << "<h2>" << source << "</h2>\n<table><tr>\n";
            for (const auto& e : entries) {
                const std::string name = tag + "_" + source + "_p" +
                                         std::to_string(static_cast<int>(e.percentile)) + "_" + e.id +
                                         ".png";
                Image im = read_image(manifest.dir / e.path);
                write_png(out_dir / name, im);
                html << "<td><img src=\"" << name << "\" width=\"160\"><br>p" << e.percentile
                     << " score " << e.score << "</td>\n";
            }
            html << "</tr></table>\n";
        }
    };
    section("fakes by fakeness", g.fakes, "fake");
    section("combined ranking", g.combined, "all");
    html << "</body></html>\n";

    std::ofstream jf(out_dir / "gallery.json", std::ios::trunc);
    if (!jf) throw StageError("cannot write gallery index");
    jf << index.dump(2) << "\n";
    std::ofstream hf(out_dir / "gallery.html", std::ios::trunc);
    if (!hf) throw StageError("cannot write gallery html");
    hf << html.str();
}

}  // namespace synthdet::harness
