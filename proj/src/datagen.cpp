#include "stratadjust/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace stratadjust {

namespace {

int base_model(int id) { return id >= 5 ? id - 4 : id; }

struct StratumScheme {
    std::vector<double> probs;
    std::vector<double> values; // level values, e.g. {1,-1} for model 4
};

StratumScheme stratum_scheme(int id) {
    switch (base_model(id)) {
        case 1:
        case 2: return {{0.2, 0.3, 0.3, 0.2}, {1, 2, 3, 4}};
        case 3: return {{0.4, 0.6}, {1, 2}};
        case 4: return {{0.5, 0.5}, {1, -1}};
    }
    throw ValidationError("unknown model id");
}

double g_fun(int base_id, int arm, const double* x, double s) {
    switch (base_id) {
        case 1:
            if (arm == 0) return 1.0 + 75 * x[0] + 35 * x[1] + 125 * x[2] + 80 * x[3];
            return 4.0 + 100 * x[0] + 80 * x[1] + 60 * x[2] + 40 * x[3];
        case 2:
            if (arm == 0)
                return -3.0 + 10 * std::log(x[0] + 1) + 24 * x[0] * x[0] +
                       15 * std::exp(x[1]) + 20 / (x[1] + 3);
            return 20 * std::exp(x[0] + 2) + 17 / (x[0] + 1) + 10 * x[1] * x[1];
        case 3:
            if (arm == 0)
                return 5.0 + 42 * x[0] * x[1] / (x[0] + x[1] + 2) +
                       83 * x[0] * x[0] * (x[1] + x[2]);
            return 2.0 + 30 * (x[1] + x[3]) + 75 * x[1] * x[1] / std::exp(x[0] + 2);
        case 4:
            if (arm == 0)
                return 5.0 + (20 * x[0] + 30 * x[1]) * s +
                       (s == 1.0 ? 50 * std::log(x[0] + 1) : 0.0);
            return 5.0 + (20 * x[0] + 30 * x[1]) * s +
                   (s == -1.0 ? 65 * std::exp(x[1]) : 0.0);
    }
    throw ValidationError("unknown model id");
}

void draw_base_covariates(int base_id, Rng& rng, double* x) {
    switch (base_id) {
        case 1:
            x[0] = rbeta(rng, 3, 4);
            x[1] = -2.0 + 4.0 * runif(rng);
            x[2] = runif(rng) < 0.5 ? -1.0 : 1.0;
            x[3] = runif(rng) < 0.6 ? 3.0 : 5.0;
            break;
        case 2:
            x[0] = rbeta(rng, 3, 4);
            x[1] = -2.0 + 4.0 * runif(rng);
            break;
        case 3:
            x[0] = rbeta(rng, 3, 4);
            x[1] = -2.0 + 4.0 * runif(rng);
            x[2] = rnorm(rng);
            x[3] = 2.0 * runif(rng);
            break;
        case 4:
            x[0] = rbeta(rng, 3, 4);
            x[1] = -2.0 + 4.0 * runif(rng);
            break;
        default:
            throw ValidationError("unknown model id");
    }
}

// Lower Cholesky factor of the Toeplitz covariance with first row
// 1, 0.5, 0.25, ... (model 7 extras). Cached per dimension.
const Eigen::MatrixXd& toeplitz_chol(int dim) {
    static std::mutex mu;
    static std::map<int, Eigen::MatrixXd> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(dim);
    if (it != cache.end()) return it->second;
    Eigen::MatrixXd cov(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) cov(i, j) = std::pow(0.5, std::abs(i - j));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("toeplitz covariance not positive definite");
    return cache.emplace(dim, Eigen::MatrixXd(llt.matrixL())).first->second;
}

}  // namespace

int ModelSpec::base_p() const {
    switch (base_model(id)) {
        case 1: return 4;
        case 2: return 2;
        case 3: return 4;
        case 4: return 2;
    }
    throw ValidationError("unknown model id");
}

int ModelSpec::total_p() const { return high_dim() ? p : base_p(); }

void ModelSpec::check() const {
    if (id < 1 || id > 8) throw ValidationError("model id must be in 1..8");
    if (n < 1) throw ValidationError("model n must be >= 1");
    if (high_dim() && p < base_p())
        throw ValidationError("model " + std::to_string(id) + " needs p >= " +
                              std::to_string(base_p()));
}

TrialDataset generate(const ModelSpec& spec, Rng& rng) {
    spec.check();
    const int base_id = base_model(spec.id);
    const int bp = spec.base_p();
    const int p = spec.total_p();
    const int n_extra = p - bp;
    const auto scheme = stratum_scheme(spec.id);
    const int n_levels = static_cast<int>(scheme.probs.size());

    TrialDataset ds;
    ds.x.resize(spec.n, p);
    ds.stratum.resize(spec.n);
    ds.y0 = Eigen::VectorXd(spec.n);
    ds.y1 = Eigen::VectorXd(spec.n);

    // Interaction plan for models 6/8: floor(p/3) of the extra columns get
    // multiplied by x1 or x2, chosen once per dataset.
    std::vector<std::pair<int, int>> interactions; // (extra column, base column)
    const bool has_interactions = (spec.id == 6 || spec.id == 8) && n_extra > 0;
    if (has_interactions) {
        int n_pick = std::min(p / 3, n_extra);
        std::vector<int> idx(n_extra);
        for (int j = 0; j < n_extra; ++j) idx[j] = j;
        for (int j = 0; j < n_pick; ++j) {
            std::uniform_int_distribution<int> pick(j, n_extra - 1);
            std::swap(idx[j], idx[pick(rng)]);
        }
        idx.resize(n_pick);
        std::sort(idx.begin(), idx.end());
        for (int j : idx)
            interactions.emplace_back(j, runif(rng) < 0.5 ? 0 : 1);
    }

    std::vector<int> level_of(spec.n);
    Eigen::VectorXd extras(std::max(n_extra, 1));
    const Eigen::MatrixXd* chol = nullptr;
    if (spec.id == 7 && n_extra > 0) chol = &toeplitz_chol(n_extra);

    for (int i = 0; i < spec.n; ++i) {
        double base[4] = {0, 0, 0, 0};
        draw_base_covariates(base_id, rng, base);
        for (int j = 0; j < bp; ++j) ds.x(i, j) = base[j];
        level_of[i] = rdiscrete(rng, scheme.probs);
        const double s_value = scheme.values[level_of[i]];
        const double eps0 = rnorm(rng), eps1 = rnorm(rng);
        (*ds.y0)[i] = g_fun(base_id, 0, base, s_value) + ModelSpec::sigma0 * eps0;
        (*ds.y1)[i] = g_fun(base_id, 1, base, s_value) + ModelSpec::sigma1 * eps1;
        if (n_extra > 0) {
            if (spec.id == 7) {
                for (int j = 0; j < n_extra; ++j) extras[j] = rnorm(rng);
                Eigen::VectorXd corr = (*chol).triangularView<Eigen::Lower>() * extras.head(n_extra);
                for (int j = 0; j < n_extra; ++j) ds.x(i, bp + j) = corr[j];
            } else {
                // Equicorrelated normals: cov 0.2 off-diagonal, unit variance.
                const double shared = rnorm(rng) * std::sqrt(0.2);
                for (int j = 0; j < n_extra; ++j)
                    ds.x(i, bp + j) = shared + std::sqrt(0.8) * rnorm(rng);
            }
        }
    }

    std::ostringstream plan;
    for (auto [j, m] : interactions) {
        ds.x.col(bp + j) = ds.x.col(bp + j).cwiseProduct(ds.x.col(m));
        if (plan.tellp() > 0) plan << ';';
        plan << "x" << (bp + j + 1) << "*x" << (m + 1);
    }

    // Densify realized stratum levels to 1..K.
    std::vector<int> realized;
    {
        std::vector<bool> seen(n_levels, false);
        for (int lv : level_of) seen[lv] = true;
        for (int lv = 0; lv < n_levels; ++lv)
            if (seen[lv]) realized.push_back(lv);
    }
    std::vector<int> dense_of(n_levels, 0);
    std::ostringstream values;
    for (std::size_t r = 0; r < realized.size(); ++r) {
        dense_of[realized[r]] = static_cast<int>(r) + 1;
        if (r) values << ',';
        values << scheme.values[realized[r]];
    }
    ds.num_strata = static_cast<int>(realized.size());
    for (int i = 0; i < spec.n; ++i) ds.stratum[i] = dense_of[level_of[i]];

    ds.pi_target = 0.5;
    ds.metadata["model"] = std::to_string(spec.id);
    ds.metadata["stratum_values"] = values.str();
    if (has_interactions) ds.metadata["interactions"] = plan.str();
    for (int j = 0; j < p; ++j) ds.covariate_names.push_back("x" + std::to_string(j + 1));
    return ds;
}

double oracle_mean(int model_id, int arm, const Eigen::RowVectorXd& x, double stratum_value) {
    ModelSpec probe{model_id, 1, std::max<int>(4, static_cast<int>(x.size()))};
    probe.check();
    if (x.size() < probe.base_p())
        throw ValidationError("oracle_mean: covariate vector shorter than the model's base dimension");
    double base[4] = {0, 0, 0, 0};
    for (int j = 0; j < probe.base_p(); ++j) base[j] = x[j];
    return g_fun(base_model(model_id), arm, base, stratum_value);
}

double true_ate_closed_form(int model_id) {
    if (base_model(model_id) != 1)
        throw ValidationError("closed-form truth is only available for models 1 and 5");
    // E[Beta(3,4)] = 3/7, E[Unif(-2,2)] = 0, E[+/-1] = 0, E[{3,5};(.6,.4)] = 3.8
    return 3.0 + 25.0 * (3.0 / 7.0) + 45.0 * 0.0 - 65.0 * 0.0 - 40.0 * 3.8;
}

MonteCarloTruth true_ate_monte_carlo(int model_id, long n_draws, std::uint64_t seed) {
    const int base_id = base_model(model_id);
    const auto scheme = stratum_scheme(model_id);
    Rng rng = make_rng(seed);
    double sum = 0.0, sumsq = 0.0;
    double base[4];
    for (long i = 0; i < n_draws; ++i) {
        draw_base_covariates(base_id, rng, base);
        const double s_value = scheme.values[rdiscrete(rng, scheme.probs)];
        const double d = g_fun(base_id, 1, base, s_value) - g_fun(base_id, 0, base, s_value);
        sum += d;
        sumsq += d * d;
    }
    MonteCarloTruth out;
    out.n_draws = n_draws;
    out.value = sum / n_draws;
    const double var = std::max(0.0, sumsq / n_draws - out.value * out.value);
    out.se = std::sqrt(var / n_draws);
    return out;
}

double true_ate_cached(int model_id) {
    static std::mutex mu;
    static std::map<int, double> cache;
    const int base_id = base_model(model_id);
    if (base_id == 1) return true_ate_closed_form(1);
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(base_id);
    if (it != cache.end()) return it->second;
    const double v = true_ate_monte_carlo(base_id, 1000000, 0x7a5e11d5u + base_id).value;
    cache.emplace(base_id, v);
    return v;
}

}  // namespace stratadjust
