#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "notefuse/core/errors.hpp"
#include "notefuse/core/rng.hpp"

namespace notefuse::eval {

// Patient-level fold assignment. Partition is disjoint and exhaustive, so no
// patient contributes pairs to both sides of any fold.
struct FoldSplit {
    int folds = 0;
    std::map<std::string, int> assignment;  // patient_id -> fold index

    std::vector<std::string> members_of(int fold) const {
        std::vector<std::string> out;
        for (const auto& [id, f] : assignment)
            if (f == fold) out.push_back(id);
        return out;
    }
};

inline FoldSplit kfold_split(std::vector<std::string> patient_ids, int folds, uint64_t seed) {
    if (folds < 2) throw input_error("kfold_split: need at least 2 folds");
    if (patient_ids.size() < static_cast<size_t>(folds))
        throw input_error("kfold_split: fewer patients than folds");

    // Sort first so the result depends only on the id set and the seed.
    std::sort(patient_ids.begin(), patient_ids.end());
    core::Rng rng(core::derive_seed(seed, "kfold"));
    rng.shuffle(patient_ids);

    FoldSplit split;
    split.folds = folds;
    // Sizes as even as possible: the first (n mod folds) folds get one extra.
    const size_t n = patient_ids.size();
    const size_t base = n / static_cast<size_t>(folds);
    const size_t extra = n % static_cast<size_t>(folds);
    size_t at = 0;
    for (int f = 0; f < folds; ++f) {
        const size_t take = base + (static_cast<size_t>(f) < extra ? 1 : 0);
        for (size_t i = 0; i < take; ++i) split.assignment[patient_ids[at++]] = f;
    }
    return split;
}

}  // namespace notefuse::eval
