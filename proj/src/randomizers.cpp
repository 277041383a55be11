#include "stratadjust/randomizers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "stratadjust/trial_data.hpp"

namespace stratadjust {

RandKind rand_kind_from_string(const std::string& s) {
    if (s == "simple" || s == "complete") return RandKind::simple;
    if (s == "stratified_block" || s == "block") return RandKind::stratified_block;
    if (s == "efron_biased_coin" || s == "efron") return RandKind::efron_biased_coin;
    if (s == "minimization") return RandKind::minimization;
    throw ValidationError("unknown randomizer '" + s + "'");
}

std::string to_string(RandKind k) {
    switch (k) {
        case RandKind::simple: return "simple";
        case RandKind::stratified_block: return "stratified_block";
        case RandKind::efron_biased_coin: return "efron_biased_coin";
        case RandKind::minimization: return "minimization";
    }
    return "?";
}

std::vector<int> simple_randomize(int n, double pi, Rng& rng) {
    if (n < 1) throw ValidationError("simple_randomize: n must be >= 1");
    std::vector<int> a(n);
    for (int i = 0; i < n; ++i) a[i] = runif(rng) < pi ? 1 : 0;
    return a;
}

std::vector<int> stratified_block(const std::vector<int>& strata,
                                  const RandomizerConfig& cfg, Rng& rng) {
    const double treated_per_block = cfg.block_size * cfg.pi;
    if (std::abs(treated_per_block - std::round(treated_per_block)) > 1e-9)
        throw ValidationError("stratified_block: block_size*pi is not an integer");
    const int t_block = static_cast<int>(std::round(treated_per_block));

    // Arrival positions per stratum.
    std::map<int, std::vector<int>> members;
    for (int i = 0; i < static_cast<int>(strata.size()); ++i)
        members[strata[i]].push_back(i);

    std::vector<int> a(strata.size(), 0);
    std::vector<int> block;
    for (auto& [k, idx] : members) {
        for (std::size_t start = 0; start < idx.size(); start += cfg.block_size) {
            const int s = static_cast<int>(std::min<std::size_t>(cfg.block_size, idx.size() - start));
            const int t = s == cfg.block_size
                              ? t_block
                              : static_cast<int>(std::floor(s * cfg.pi + 0.5)); // round half up
            block.assign(s, 0);
            std::fill(block.begin(), block.begin() + t, 1);
            std::shuffle(block.begin(), block.end(), rng);
            for (int j = 0; j < s; ++j) a[idx[start + j]] = block[j];
        }
    }
    return a;
}

std::vector<int> efron_biased_coin(const std::vector<int>& strata,
                                   const RandomizerConfig& cfg, Rng& rng) {
    if (std::abs(cfg.pi - 0.5) > 1e-12)
        throw ValidationError("efron_biased_coin: classic form requires pi = 1/2");
    if (!(cfg.coin_prob > 0.5 && cfg.coin_prob <= 1.0))
        throw ValidationError("efron_biased_coin: coin_prob must be in (0.5, 1]");
    std::map<int, int> imbalance; // treated - control per stratum
    std::vector<int> a(strata.size());
    for (std::size_t i = 0; i < strata.size(); ++i) {
        int& d = imbalance[strata[i]];
        double p_treat;
        if (d == 0) p_treat = 0.5;
        else if (d < 0) p_treat = cfg.coin_prob;      // treatment under-represented
        else p_treat = 1.0 - cfg.coin_prob;
        a[i] = runif(rng) < p_treat ? 1 : 0;
        d += a[i] == 1 ? 1 : -1;
    }
    return a;
}

std::vector<int> pocock_simon_minimization(const std::vector<std::vector<int>>& z,
                                           const RandomizerConfig& cfg, Rng& rng) {
    const int n = static_cast<int>(z.size());
    if (n == 0) return {};
    const int q = static_cast<int>(z[0].size());
    if (q < 1) throw ValidationError("minimization: needs at least one covariate");
    std::vector<double> w = cfg.weights;
    if (w.empty()) w.assign(q, 1.0);
    if (static_cast<int>(w.size()) != q)
        throw ValidationError("minimization: weight count does not match covariates");

    // Per-covariate level counts: counts[j][level] = {treated, control}.
    std::vector<std::map<int, std::pair<int, int>>> counts(q);
    const double inv_pi = 1.0 / cfg.pi, inv_qi = 1.0 / (1.0 - cfg.pi);

    std::vector<int> a(n);
    for (int i = 0; i < n; ++i) {
        double imb_treat = 0.0, imb_ctrl = 0.0;
        for (int j = 0; j < q; ++j) {
            auto [t, c] = counts[j][z[i][j]];
            imb_treat += w[j] * std::abs((t + 1) * inv_pi - c * inv_qi);
            imb_ctrl += w[j] * std::abs(t * inv_pi - (c + 1) * inv_qi);
        }
        double p_treat;
        if (imb_treat < imb_ctrl) p_treat = cfg.coin_prob;
        else if (imb_treat > imb_ctrl) p_treat = 1.0 - cfg.coin_prob;
        else p_treat = cfg.pi;
        a[i] = runif(rng) < p_treat ? 1 : 0;
        for (int j = 0; j < q; ++j) {
            auto& cell = counts[j][z[i][j]];
            if (a[i] == 1) ++cell.first; else ++cell.second;
        }
    }
    return a;
}

std::vector<int> randomize(const std::vector<int>& strata,
                           const RandomizerConfig& cfg, Rng& rng) {
    switch (cfg.kind) {
        case RandKind::simple:
            return simple_randomize(static_cast<int>(strata.size()), cfg.pi, rng);
        case RandKind::stratified_block:
            return stratified_block(strata, cfg, rng);
        case RandKind::efron_biased_coin:
            return efron_biased_coin(strata, cfg, rng);
        case RandKind::minimization: {
            std::vector<std::vector<int>> z(strata.size(), std::vector<int>(1));
            for (std::size_t i = 0; i < strata.size(); ++i) z[i][0] = strata[i];
            return pocock_simon_minimization(z, cfg, rng);
        }
    }
    throw ValidationError("unknown randomizer kind");
}

}  // namespace stratadjust
