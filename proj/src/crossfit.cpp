#include "stratadjust/crossfit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stratadjust {

FoldPartition partition_folds(int n, int m_folds, Rng& rng) {
    if (m_folds < 2 || m_folds > n)
        throw ValidationError("partition_folds: need 2 <= M <= n");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    FoldPartition part;
    part.folds.resize(m_folds);
    const int base = n / m_folds;
    int at = 0;
    for (int m = 0; m < m_folds; ++m) {
        const int size = m + 1 < m_folds ? base : n - (m_folds - 1) * base;
        part.folds[m].assign(perm.begin() + at, perm.begin() + at + size);
        at += size;
    }
    return part;
}

namespace {

// Every fold must contain at least one unit of each arm in each stratum.
bool folds_cover_cells(const TrialDataset& ds, const FoldPartition& part) {
    for (const auto& fold : part.folds) {
        std::vector<int> seen(2 * ds.num_strata, 0);
        for (int i : fold) seen[2 * (ds.stratum[i] - 1) + ds.arm[i]] = 1;
        for (int v : seen)
            if (!v) return false;
    }
    return true;
}

}  // namespace

EffectEstimate crossfit_estimate(const TrialDataset& ds, const AdjusterSpec& spec,
                                 int m_folds, Rng& rng, double level) {
    if (!ds.assigned() || ds.y.size() != ds.n())
        throw EstimationError("crossfit: dataset has no assignments/outcomes");

    FoldPartition part;
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
        part = partition_folds(ds.n(), m_folds, rng);
        ok = folds_cover_cells(ds, part);
    }
    if (!ok)
        throw EstimationError(
            "crossfit: no partition with every (fold, stratum, arm) cell occupied "
            "after 20 draws");

    double tau = 0.0, var_r = 0.0, var_hr = 0.0;
    std::vector<int> complement;
    for (int m = 0; m < m_folds; ++m) {
        complement.clear();
        for (int mm = 0; mm < m_folds; ++mm)
            if (mm != m)
                complement.insert(complement.end(), part.folds[mm].begin(),
                                  part.folds[mm].end());
        std::sort(complement.begin(), complement.end());

        const TrialDataset train = subset(ds, complement);
        ProjectionFit f = fit(spec, train, rng);

        std::vector<int> eval = part.folds[m];
        std::sort(eval.begin(), eval.end());
        const TrialDataset hold = subset(ds, eval);
        const EffectEstimate em = adjusted_estimate(hold, f, level);
        tau += em.tau_hat;
        var_r += em.var_r;
        var_hr += em.var_hr;
    }

    EffectEstimate est;
    est.tau_hat = tau / m_folds;
    est.var_r = var_r / m_folds;
    est.var_hr = var_hr / m_folds;
    est.n = ds.n();
    est.se = std::sqrt((est.var_r + est.var_hr) / ds.n());
    wald_ci(est, level);
    est.method = spec.label() + "+ss(M=" + std::to_string(m_folds) + ")";
    return est;
}

}  // namespace stratadjust
