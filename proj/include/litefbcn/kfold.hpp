#pragma once

#include "litefbcn/dataset.hpp"

namespace lfb {

// Index sets into the manifest rows. Fold f tests on fold f, validates on
// fold (f+1) mod k, trains on the remainder.
struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Stratified k-fold assignment: per class, samples (or whole groups when
// group_aware) are shuffled and dealt round-robin, keeping per-fold class
// proportions within one sample of the global mix. Deterministic per seed.
std::vector<FoldSplit> stratified_kfold(const DatasetManifest& manifest, std::size_t k,
                                        std::uint64_t seed, bool group_aware);

}  // namespace lfb
