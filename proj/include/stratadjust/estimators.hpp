#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "stratadjust/trial_data.hpp"

namespace stratadjust {

// Point estimate of the average treatment effect with its two variance
// components: var_r captures within-stratum residual variation of the
// transformed outcomes, var_hr between-stratum treatment effect
// heterogeneity. se = sqrt((var_r + var_hr) / n).
struct EffectEstimate {
    double tau_hat = 0.0;
    double var_r = 0.0;
    double var_hr = 0.0;
    double se = 0.0;
    double ci_level = 0.95;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n = 0;
    std::string method;
};

// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley refinement; relative error < 1e-14 on (1e-300, 1-1e-16)).
double normal_quantile(double p);

void wald_ci(EffectEstimate& est, double level);

// Sample analogs of the variance components for transformed outcomes r_hat
// (one value per unit, taken at the unit's observed arm). pi is the target
// allocation, not the realized one.
std::pair<double, double> variance_components(const TrialDataset& ds,
                                              const Eigen::VectorXd& r_hat,
                                              double pi);

// Stratum-aggregated difference in means; variance components with
// r_hat = y.
EffectEstimate naive_estimate(const TrialDataset& ds, double level = 0.95);

// Regression-adjusted estimator given the projection values h1_i = h(x_i, 1)
// and h0_i = h(x_i, 0) for every unit. The correction terms use realized
// within-stratum allocation; the transformed outcomes use the target pi.
EffectEstimate adjusted_estimate(const TrialDataset& ds,
                                 const Eigen::VectorXd& h1,
                                 const Eigen::VectorXd& h0,
                                 double level = 0.95);

std::string effect_csv_header();
std::string to_csv_row(const EffectEstimate& est);
std::string to_json_line(const EffectEstimate& est);

}  // namespace stratadjust
