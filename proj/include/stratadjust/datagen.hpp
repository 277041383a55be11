#pragma once

#include <Eigen/Dense>
#include <string>

#include "stratadjust/rng.hpp"
#include "stratadjust/trial_data.hpp"

namespace stratadjust {

// Synthetic trial models. Models 1-4 are low-dimensional (p fixed at 4, 2,
// 4, 2); models 5-8 share the same outcome surfaces and append correlated
// noise covariates up to p total columns.
struct ModelSpec {
    int id = 1;
    int n = 1000;
    int p = 0; // total covariates for models 5-8; ignored for 1-4

    static constexpr double sigma0 = 1.0;
    static constexpr double sigma1 = 3.0;

    int base_p() const;
    int total_p() const;
    bool high_dim() const { return id >= 5; }
    void check() const;
};

// n i.i.d. units with potential outcomes and stratum labels; treatment is
// left unassigned. Realized stratum levels are densified to 1..K and the
// underlying level values recorded in metadata["stratum_values"].
TrialDataset generate(const ModelSpec& spec, Rng& rng);

// Conditional mean E[Y(a) | X=x, stratum value s]; the stratum value only
// matters for models 4 and 8. Only the base covariates of x are read.
double oracle_mean(int model_id, int arm, const Eigen::RowVectorXd& x, double stratum_value);

// Average treatment effect by moment arithmetic; models 1 and 5 only.
double true_ate_closed_form(int model_id);

struct MonteCarloTruth {
    double value = 0.0;
    double se = 0.0;
    long n_draws = 0;
};

MonteCarloTruth true_ate_monte_carlo(int model_id, long n_draws, std::uint64_t seed);

// Per-model truth used for coverage: closed form where available, otherwise
// a cached monte_carlo(1e6) under a fixed internal seed.
double true_ate_cached(int model_id);

}  // namespace stratadjust
