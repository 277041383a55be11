#include "stratadjust/estimators.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace stratadjust {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must be in (0,1)");
    // Acklam's approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    // One Halley step against erfc.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

void wald_ci(EffectEstimate& est, double level) {
    const double z = normal_quantile(0.5 + level / 2);
    est.ci_level = level;
    est.ci_low = est.tau_hat - z * est.se;
    est.ci_high = est.tau_hat + z * est.se;
}

namespace {

struct CellSums {
    int n_k = 0, n_k1 = 0, n_k0 = 0;
    double sum_y1 = 0, sum_y0 = 0;
};

std::vector<CellSums> cell_sums(const TrialDataset& ds) {
    if (!ds.assigned() || ds.y.size() != ds.n())
        throw EstimationError("dataset has no treatment assignment/outcomes");
    std::vector<CellSums> cells(ds.num_strata);
    for (int i = 0; i < ds.n(); ++i) {
        auto& c = cells[ds.stratum[i] - 1];
        ++c.n_k;
        if (ds.arm[i] == 1) { ++c.n_k1; c.sum_y1 += ds.y[i]; }
        else { ++c.n_k0; c.sum_y0 += ds.y[i]; }
    }
    for (int k = 0; k < ds.num_strata; ++k) {
        if (cells[k].n_k1 == 0)
            throw EstimationError("stratum " + std::to_string(k + 1) + " has no treated units");
        if (cells[k].n_k0 == 0)
            throw EstimationError("stratum " + std::to_string(k + 1) + " has no control units");
    }
    return cells;
}

}  // namespace

std::pair<double, double> variance_components(const TrialDataset& ds,
                                              const Eigen::VectorXd& r_hat,
                                              double pi) {
    if (r_hat.size() != ds.n())
        throw ValidationError("variance_components: r_hat length mismatch");
    const int K = ds.num_strata;
    const int n = ds.n();
    std::vector<int> n1(K, 0), n0(K, 0);
    std::vector<double> m1(K, 0.0), m0(K, 0.0);
    for (int i = 0; i < n; ++i) {
        int k = ds.stratum[i] - 1;
        if (ds.arm[i] == 1) { ++n1[k]; m1[k] += r_hat[i]; }
        else { ++n0[k]; m0[k] += r_hat[i]; }
    }
    long tot1 = 0, tot0 = 0;
    double g1 = 0.0, g0 = 0.0; // overall arm means of r_hat
    for (int k = 0; k < K; ++k) {
        if (n1[k] == 0 || n0[k] == 0)
            throw EstimationError("stratum " + std::to_string(k + 1) +
                                  " has an empty arm cell");
        g1 += m1[k]; g0 += m0[k];
        tot1 += n1[k]; tot0 += n0[k];
        m1[k] /= n1[k]; m0[k] /= n0[k];
    }
    g1 /= tot1; g0 /= tot0;

    std::vector<double> ss1(K, 0.0), ss0(K, 0.0);
    for (int i = 0; i < n; ++i) {
        int k = ds.stratum[i] - 1;
        if (ds.arm[i] == 1) { double d = r_hat[i] - m1[k]; ss1[k] += d * d; }
        else { double d = r_hat[i] - m0[k]; ss0[k] += d * d; }
    }
    double var_r = 0.0, var_hr = 0.0;
    for (int k = 0; k < K; ++k) {
        const double p_nk = static_cast<double>(n1[k] + n0[k]) / n;
        var_r += p_nk * (ss1[k] / n1[k]) / pi + p_nk * (ss0[k] / n0[k]) / (1.0 - pi);
        const double h = (m1[k] - g1) - (m0[k] - g0);
        var_hr += p_nk * h * h;
    }
    return {var_r, var_hr};
}

EffectEstimate adjusted_estimate(const TrialDataset& ds,
                                 const Eigen::VectorXd& h1,
                                 const Eigen::VectorXd& h0,
                                 double level) {
    if (h1.size() != ds.n() || h0.size() != ds.n())
        throw ValidationError("adjusted_estimate: projection value length mismatch");
    const auto cells = cell_sums(ds);
    const int n = ds.n();
    const int K = ds.num_strata;

    std::vector<double> corr1(K, 0.0), corr0(K, 0.0);
    for (int i = 0; i < n; ++i) {
        const int k = ds.stratum[i] - 1;
        const double pi_nk = static_cast<double>(cells[k].n_k1) / cells[k].n_k;
        const double w = ds.arm[i] - pi_nk;
        corr1[k] += w * h1[i];
        corr0[k] += w * h0[i];
    }
    double tau = 0.0;
    for (int k = 0; k < K; ++k) {
        const auto& c = cells[k];
        const double p_nk = static_cast<double>(c.n_k) / n;
        const double term1 = c.sum_y1 / c.n_k1 - corr1[k] / c.n_k1;
        const double term0 = c.sum_y0 / c.n_k0 + corr0[k] / c.n_k0;
        tau += p_nk * (term1 - term0);
    }

    const double pi = ds.pi_target;
    Eigen::VectorXd r_hat(n);
    for (int i = 0; i < n; ++i)
        r_hat[i] = ds.y[i] - ((1.0 - pi) * h1[i] + pi * h0[i]);

    EffectEstimate est;
    est.tau_hat = tau;
    est.n = n;
    std::tie(est.var_r, est.var_hr) = variance_components(ds, r_hat, pi);
    est.se = std::sqrt((est.var_r + est.var_hr) / n);
    wald_ci(est, level);
    return est;
}

EffectEstimate naive_estimate(const TrialDataset& ds, double level) {
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(ds.n());
    EffectEstimate est = adjusted_estimate(ds, zeros, zeros, level);
    est.method = "naive";
    return est;
}

std::string effect_csv_header() {
    return "tau,se,var_r,var_hr,ci_level,ci_low,ci_high,n,method";
}

std::string to_csv_row(const EffectEstimate& est) {
    std::ostringstream os;
    os.precision(10);
    os << est.tau_hat << ',' << est.se << ',' << est.var_r << ',' << est.var_hr << ','
       << est.ci_level << ',' << est.ci_low << ',' << est.ci_high << ',' << est.n << ','
       << est.method;
    return os.str();
}

std::string to_json_line(const EffectEstimate& est) {
    nlohmann::json j{{"tau", est.tau_hat},     {"se", est.se},
                     {"var_r", est.var_r},     {"var_hr", est.var_hr},
                     {"ci_level", est.ci_level}, {"ci_low", est.ci_low},
                     {"ci_high", est.ci_high}, {"n", est.n},
                     {"method", est.method}};
    return j.dump();
}

}  // namespace stratadjust
