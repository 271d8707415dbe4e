#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "synthdet/augment/augment.hpp"
#include "synthdet/core/hash.hpp"
#include "synthdet/detector/model.hpp"
#include "synthdet/metrics/evaluate.hpp"

namespace synthdet::robustness {

enum class PerturbationKind { blur, jpeg };

inline std::string to_string(PerturbationKind k) {
    return k == PerturbationKind::blur ? "blur" : "jpeg";
}
inline PerturbationKind perturbation_kind_from_string(const std::string& s) {
    if (s == "blur") return PerturbationKind::blur;
    if (s == "jpeg") return PerturbationKind::jpeg;
    throw ValidationError("unknown perturbation kind: " + s);
}

// Severity levels in sweep order. Blur levels are sigmas; JPEG levels are
// qualities with 0 standing for the lossless identity.
struct PerturbationGrid {
    PerturbationKind kind = PerturbationKind::blur;
    std::vector<double> levels;
};

inline PerturbationGrid default_blur_grid() {
    return {PerturbationKind::blur, {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}};
}
inline PerturbationGrid default_jpeg_grid() {
    return {PerturbationKind::jpeg, {0.0, 90, 80, 70, 60, 50, 40, 30}};
}

inline void validate_grid(const PerturbationGrid& grid) {
    if (grid.levels.empty()) throw ValidationError("perturbation grid has no levels");
    if (grid.levels.front() != 0.0)
        throw ValidationError("perturbation grid must start with the identity level");
    for (double lvl : grid.levels) {
        if (!std::isfinite(lvl) || lvl < 0.0)
            throw ValidationError("perturbation level must be finite and nonnegative");
        if (grid.kind == PerturbationKind::jpeg && lvl != 0.0 &&
            (lvl != std::floor(lvl) || lvl < 1.0 || lvl > 100.0))
            throw ValidationError("jpeg level must be an integer quality in [1,100]");
    }
}

inline std::string level_label(const PerturbationGrid& grid, double level) {
    if (grid.kind == PerturbationKind::jpeg)
        return level == 0.0 ? "lossless" : std::to_string(static_cast<int>(level));
    std::ostringstream os;
    os << level;
    return os.str();
}

struct RobustnessPoint {
    double level = 0.0;
    double ap = std::numeric_limits<double>::quiet_NaN();
    double accuracy_oracle = 0.0;
};

struct RobustnessCurve {
    PerturbationGrid grid;
    std::string model_fingerprint;
    std::string codec_variant;
    std::vector<RobustnessPoint> points;
    std::vector<metrics::ScoreSet> level_scores;      // one per level, in grid order
    std::vector<std::vector<AppliedOps>> level_ops;   // aligned with level_scores entries
};

inline Image apply_perturbation(const Image& im, PerturbationKind kind, double level,
                                const JpegCodecConfig& codec, AppliedOps& ops) {
    if (kind == PerturbationKind::blur) {
        ops.blurred = level > 0.0;
        ops.sigma = level;
        return gaussian_blur(im, level);
    }
    if (level == 0.0) return im;
    ops.jpegged = true;
    ops.quality = static_cast<int>(level);
    ops.codec_variant = codec.variant_id;
    return jpeg_reencode(im, ops.quality, codec);
}

struct RobustnessOptions {
    metrics::ResizeMode resize_mode = metrics::ResizeMode::none;
    JpegCodecConfig codec = default_codec_variants()[0];
    std::string model_fingerprint;
};

// One evaluation pass per level; the perturbation slots in after source
// preprocessing and before the center crop, for reals and fakes alike.
inline RobustnessCurve robustness_sweep(const metrics::Scorer& scorer,
                                        const DatasetManifest& manifest,
                                        const PerturbationGrid& grid,
                                        const RobustnessOptions& options = {}) {
    validate_grid(grid);
    RobustnessCurve curve;
    curve.grid = grid;
    curve.model_fingerprint = options.model_fingerprint;
    curve.codec_variant = options.codec.variant_id;
    for (double level : grid.levels) {
        std::vector<AppliedOps> ops_log;
        metrics::ImageHook hook = [&](Image im) {
            AppliedOps ops;
            Image out = apply_perturbation(im, grid.kind, level, options.codec, ops);
            ops_log.push_back(ops);
            return out;
        };
        metrics::ScoreSet scores =
            metrics::score_test_split(scorer, manifest, options.resize_mode, hook);
        metrics::EvaluationReport report = metrics::aggregate_scores(scores, std::nullopt);
        double acc = 0.0;
        long n = 0;
        for (const auto& [source, sr] : report.sources) {
            const long cnt = sr.n_real + sr.n_fake;
            acc += sr.accuracy_oracle * static_cast<double>(cnt);
            n += cnt;
        }
        curve.points.push_back({level, report.map, acc / static_cast<double>(n)});
        curve.level_scores.push_back(std::move(scores));
        curve.level_ops.push_back(std::move(ops_log));
    }
    return curve;
}

inline std::string model_fingerprint(const detector::DetectorModel& model) {
    uint64_t h = kFnvOffset;
    for (const auto* p : model.params()) h = fnv1a64(p->w.data(), p->w.size() * sizeof(float), h);
    for (const auto* b : model.buffers()) h = fnv1a64(b->data(), b->size() * sizeof(float), h);
    h = hash_combine(h, model.spec.architecture_id, model.spec.pretrained ? 1 : 0);
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << h;
    return os.str();
}

inline RobustnessCurve robustness_sweep(const detector::DetectorModel& model,
                                        const DatasetManifest& manifest,
                                        const PerturbationGrid& grid,
                                        RobustnessOptions options = {}) {
    if (options.model_fingerprint.empty()) options.model_fingerprint = model_fingerprint(model);
    metrics::Scorer scorer = [&model](const Image& im) {
        return detector::score(model, {im})[0];
    };
    return robustness_sweep(scorer, manifest, grid, options);
}

inline std::string curve_stem(const RobustnessCurve& curve) {
    std::string stem = "robustness_" + to_string(curve.grid.kind);
    for (double lvl : curve.grid.levels) stem += "_" + level_label(curve.grid, lvl);
    if (!curve.model_fingerprint.empty()) stem += "_" + curve.model_fingerprint;
    return stem;
}

inline void write_curve_csv(const RobustnessCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StageError("cannot write robustness csv: " + path.string());
    out << "level,ap,acc_oracle\n";
    out << std::setprecision(17);
    for (const auto& p : curve.points)
        out << level_label(curve.grid, p.level) << "," << p.ap << "," << p.accuracy_oracle << "\n";
}

// Minimal line plot: AP in [0,1] against grid position.
inline void write_curve_png(const RobustnessCurve& curve, const std::filesystem::path& path) {
    const int w = 640, h = 480, ml = 60, mb = 40, mt = 20, mr = 20;
    Image canvas = Image::filled(h, w, 255, 255, 255);
    auto put = [&](int y, int x, uint8_t r, uint8_t g, uint8_t b) {
        if (y >= 0 && y < h && x >= 0 && x < w) {
            canvas.at(y, x, 0) = r;
            canvas.at(y, x, 1) = g;
            canvas.at(y, x, 2) = b;
        }
    };
    for (int x = ml; x <= w - mr; ++x) put(h - mb, x, 40, 40, 40);
    for (int y = mt; y <= h - mb; ++y) put(y, ml, 40, 40, 40);
    const size_t n = curve.points.size();
    auto px = [&](size_t i) {
        return n == 1 ? ml
                      : ml + static_cast<int>(static_cast<double>(i) * (w - ml - mr) /
                                              static_cast<double>(n - 1));
    };
    auto py = [&](double ap) {
        const double v = std::isnan(ap) ? 0.0 : std::clamp(ap, 0.0, 1.0);
        return (h - mb) - static_cast<int>(v * (h - mb - mt));
    };
    for (size_t i = 0; i + 1 < n; ++i) {
        const int x0 = px(i), y0 = py(curve.points[i].ap);
        const int x1 = px(i + 1), y1 = py(curve.points[i + 1].ap);
        const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            put(static_cast<int>(std::lround(y0 + t * (y1 - y0))),
                static_cast<int>(std::lround(x0 + t * (x1 - x0))), 30, 60, 180);
        }
    }
    for (size_t i = 0; i < n; ++i)
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
                put(py(curve.points[i].ap) + dy, px(i) + dx, 180, 40, 40);
    write_png(path, canvas);
}

}  // namespace synthdet::robustness
