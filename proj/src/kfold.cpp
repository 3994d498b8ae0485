#include "litefbcn/kfold.hpp"

#include <algorithm>
#include <map>

#include "litefbcn/rng.hpp"

namespace lfb {

std::vector<FoldSplit> stratified_kfold(const DatasetManifest& manifest, std::size_t k,
                                        std::uint64_t seed, bool group_aware) {
    if (k < 2) throw TooFewSamples("stratified_kfold: k must be at least 2");
    const std::size_t n = manifest.rows.size();
    if (n == 0) throw TooFewSamples("stratified_kfold: empty manifest");

    const std::size_t n_classes = manifest.num_classes();

    // Units are single samples, or whole groups when group_aware; a group
    // takes the class of its first row.
    struct Unit {
        std::size_t label;
        std::vector<std::size_t> indices;
    };
    std::vector<Unit> units;
    if (group_aware) {
        std::map<std::string, std::size_t> group_to_unit;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& g = manifest.rows[i].group;
            if (g.empty()) {
                units.push_back({manifest.rows[i].label, {i}});
                continue;
            }
            auto it = group_to_unit.find(g);
            if (it == group_to_unit.end()) {
                group_to_unit.emplace(g, units.size());
                units.push_back({manifest.rows[i].label, {i}});
            } else {
                units[it->second].indices.push_back(i);
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) units.push_back({manifest.rows[i].label, {i}});
    }

    std::vector<std::vector<std::size_t>> per_class(n_classes);
    for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].label >= n_classes) {
            throw LabelOutOfRange("stratified_kfold: label " + std::to_string(units[u].label));
        }
        per_class[units[u].label].push_back(u);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (per_class[c].size() < k) {
            throw TooFewSamples("stratified_kfold: class " + std::to_string(c) + " has only " +
                                std::to_string(per_class[c].size()) +
                                (group_aware ? " groups" : " samples") + " for k=" +
                                std::to_string(k));
        }
    }

    std::vector<std::vector<std::size_t>> fold_members(k);
    for (std::size_t c = 0; c < n_classes; ++c) {
        CounterRng rng(derive_seed(seed, 0xF01Dull + c));
        rng.shuffle(per_class[c]);
        for (std::size_t i = 0; i < per_class[c].size(); ++i) {
            const std::size_t fold = (c + i) % k;  // rotate start to balance fold sizes
            for (std::size_t idx : units[per_class[c][i]].indices) {
                fold_members[fold].push_back(idx);
            }
        }
    }
    for (auto& members : fold_members) std::sort(members.begin(), members.end());

    std::vector<FoldSplit> out(k);
    for (std::size_t f = 0; f < k; ++f) {
        out[f].test = fold_members[f];
        out[f].val = fold_members[(f + 1) % k];
        for (std::size_t other = 0; other < k; ++other) {
            if (other == f || other == (f + 1) % k) continue;
            out[f].train.insert(out[f].train.end(), fold_members[other].begin(),
                                fold_members[other].end());
        }
        std::sort(out[f].train.begin(), out[f].train.end());
    }
    return out;
}

}  // namespace lfb
