#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"

namespace synthdet::metrics {

struct ScoreEntry {
    std::string id;
    std::string source_id;
    std::string category;
    int label = 0;  // real=0, fake=1
    double score = 0.0;
};

struct ScoreSet {
    std::vector<ScoreEntry> entries;
};

inline void validate_score_set(const ScoreSet& s) {
    if (s.entries.empty()) throw ValidationError("score set has no entries");
    for (const auto& e : s.entries) {
        if (!std::isfinite(e.score))
            throw ValidationError("score set entry '" + e.id + "' has a non-finite score");
        if (e.label != 0 && e.label != 1)
            throw ValidationError("score set entry '" + e.id + "' has a non-binary label");
    }
}

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
};

namespace detail {

inline void require_both_classes(const std::vector<int>& labels) {
    const long pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0) throw ValidationError("average precision undefined: no positive labels");
    if (pos == static_cast<long>(labels.size()))
        throw ValidationError("average precision undefined: no negative labels");
}

}  // namespace detail

// One point per descending-score tie group that increases recall; the area
// under the step curve through these points is the average precision.
inline std::vector<PRPoint> pr_curve(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("pr_curve: score/label count mismatch");
    if (scores.empty()) throw ValidationError("pr_curve: empty input");
    detail::require_both_classes(labels);

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    const double total_pos =
        static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    std::vector<PRPoint> curve;
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        long gtp = 0, gfp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] == 1)
                ++gtp;
            else
                ++gfp;
            ++j;
        }
        tp += gtp;
        fp += gfp;
        if (gtp > 0)
            curve.push_back({static_cast<double>(tp) / total_pos,
                             static_cast<double>(tp) / static_cast<double>(tp + fp)});
        i = j;
    }
    return curve;
}

inline double average_precision(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    const auto curve = pr_curve(scores, labels);
    double ap = 0.0, prev_recall = 0.0;
    for (const auto& p : curve) {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return ap;
}

inline double accuracy_at_threshold(const std::vector<double>& scores,
                                    const std::vector<int>& labels, double t) {
    if (scores.size() != labels.size())
        throw ValidationError("accuracy_at_threshold: score/label count mismatch");
    if (scores.empty()) throw ValidationError("accuracy_at_threshold: empty input");
    long correct = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const int pred = scores[i] >= t ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

struct OracleThreshold {
    double threshold = 0.0;
    double accuracy = 0.0;
};

// Candidates are midpoints between adjacent distinct scores plus the two
// infinite sentinels; ties in accuracy resolve to the smallest threshold.
inline OracleThreshold oracle_threshold(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("oracle_threshold: score/label count mismatch");
    if (scores.empty()) throw ValidationError("oracle_threshold: empty input");

    std::vector<double> uniq = scores;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<double> candidates;
    candidates.push_back(-std::numeric_limits<double>::infinity());
    for (size_t i = 0; i + 1 < uniq.size(); ++i)
        candidates.push_back(uniq[i] + (uniq[i + 1] - uniq[i]) / 2.0);
    candidates.push_back(std::numeric_limits<double>::infinity());

    OracleThreshold best{candidates.front(), -1.0};
    for (double t : candidates) {
        const double acc = accuracy_at_threshold(scores, labels, t);
        if (acc > best.accuracy) best = {t, acc};
    }
    return best;
}

}  // namespace synthdet::metrics
