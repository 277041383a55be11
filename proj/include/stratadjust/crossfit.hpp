#pragma once

#include <vector>

#include "stratadjust/adjusters.hpp"
#include "stratadjust/estimators.hpp"
#include "stratadjust/rng.hpp"
#include "stratadjust/trial_data.hpp"

namespace stratadjust {

// Even M-fold random partition of {0..n-1}: folds 1..M-1 have floor(n/M)
// indices, the last has the remainder.
struct FoldPartition {
    std::vector<std::vector<int>> folds;

    int fold_count() const { return static_cast<int>(folds.size()); }
};

FoldPartition partition_folds(int n, int m_folds, Rng& rng);

// Cross-fitted estimator: for each fold, the projection function is fitted
// on the complementary folds and the effect estimated on the fold itself;
// point estimates and variance estimates are averaged over folds. A
// partition leaving some (fold, stratum, arm) cell empty is redrawn up to
// 20 times before aborting.
EffectEstimate crossfit_estimate(const TrialDataset& ds, const AdjusterSpec& spec,
                                 int m_folds, Rng& rng, double level = 0.95);

}  // namespace stratadjust
