#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthdet/core/hash.hpp"
#include "synthdet/corpus/manifest.hpp"

namespace synthdet {

namespace detail {

inline double keep_score(uint64_t seed, const ImageRecord& a, std::string_view extra) {
    uint64_t h = hash_combine(seed, std::string_view("sample"), std::string_view(a.source_id),
                              std::string_view(a.category), static_cast<uint64_t>(a.split),
                              std::string_view(a.id), extra);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Stratified subsampling per (source, category, split). Records are paired
// real/fake by sorted id within each group and kept or dropped as a pair, so
// balanced groups stay exactly balanced and re-applying the same arguments is
// the identity on the result.
inline DatasetManifest sample_split(const DatasetManifest& m,
                                    const std::optional<std::set<std::string>>& categories, double fraction,
                                    uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in (0, 1]");
    if (categories && categories->empty()) throw ValidationError("category set must be nonempty");

    std::vector<char> keep(m.records.size(), 0);
    std::map<std::tuple<std::string, std::string, Split>, std::pair<std::vector<size_t>, std::vector<size_t>>>
        groups;  // (source, category, split) -> (real indices, fake indices)
    for (size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        if (categories && !categories->count(r.category)) continue;
        auto& g = groups[{r.source_id, r.category, r.split}];
        (r.label == Label::real ? g.first : g.second).push_back(i);
    }

    auto by_id = [&](size_t a, size_t b) { return m.records[a].id < m.records[b].id; };
    for (auto& [key, g] : groups) {
        auto& [reals, fakes] = g;
        std::sort(reals.begin(), reals.end(), by_id);
        std::sort(fakes.begin(), fakes.end(), by_id);
        size_t npairs = std::min(reals.size(), fakes.size());
        for (size_t i = 0; i < npairs; ++i) {
            double u = detail::keep_score(seed, m.records[reals[i]], m.records[fakes[i]].id);
            if (u < fraction) keep[reals[i]] = keep[fakes[i]] = 1;
        }
        auto singles = [&](const std::vector<size_t>& v) {
            for (size_t i = npairs; i < v.size(); ++i) {
                const auto& rec = m.records[v[i]];
                if (detail::keep_score(seed, rec, to_string(rec.label)) < fraction) keep[v[i]] = 1;
            }
        };
        singles(reals);
        singles(fakes);
    }

    DatasetManifest out;
    out.sources = m.sources;
    out.balanced = m.balanced;
    out.metadata = m.metadata;
    out.dir = m.dir;
    bool had_train = false, kept_train = false;
    for (size_t i = 0; i < m.records.size(); ++i) {
        if (m.records[i].split == Split::train) had_train = true;
        if (!keep[i]) continue;
        if (m.records[i].split == Split::train) kept_train = true;
        out.records.push_back(m.records[i]);
    }
    if (had_train && !kept_train)
        throw ValidationError("sample_split: resulting train split is empty (fraction too small?)");
    validate_manifest(out);
    return out;
}

}  // namespace synthdet
