#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "stratadjust/adjusters.hpp"

namespace stratadjust {

namespace {

struct Standardized {
    Eigen::MatrixXd xs;      // centered, unit population SD columns
    Eigen::VectorXd mean, sd; // sd = 0 marks an excluded constant column
    Eigen::VectorXd yc;      // centered outcomes
    double y_mean = 0.0;
};

Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const int m = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    Standardized s;
    s.xs.resize(m, p);
    s.mean.resize(p);
    s.sd.resize(p);
    for (int j = 0; j < p; ++j) {
        s.mean[j] = x.col(j).mean();
        const double var = (x.col(j).array() - s.mean[j]).square().sum() / m;
        s.sd[j] = std::sqrt(var);
        if (s.sd[j] > 0.0)
            s.xs.col(j) = (x.col(j).array() - s.mean[j]) / s.sd[j];
        else
            s.xs.col(j).setZero();
    }
    s.y_mean = y.mean();
    s.yc = y.array() - s.y_mean;
    return s;
}

// Cyclical coordinate descent on standardized data, objective
// (1/2m)||yc - xs*b||^2 + lambda*||b||_1, warm-started from b.
// Full sweeps alternate with active-set sweeps until stable.
void coordinate_descent(const Eigen::MatrixXd& xs, Eigen::VectorXd& residual,
                        Eigen::VectorXd& b, double lambda, double tol) {
    const int m = static_cast<int>(xs.rows());
    const int p = static_cast<int>(xs.cols());
    const double inv_m = 1.0 / m;
    auto sweep = [&](const std::vector<int>& cols) {
        double max_delta = 0.0;
        for (int j : cols) {
            const double old = b[j];
            const double rho = inv_m * xs.col(j).dot(residual) + old;
            double next = std::abs(rho) <= lambda ? 0.0
                          : rho > 0.0 ? rho - lambda : rho + lambda;
            if (next != old) {
                residual.noalias() -= (next - old) * xs.col(j);
                b[j] = next;
                max_delta = std::max(max_delta, std::abs(next - old));
            }
        }
        return max_delta;
    };

    std::vector<int> all(p);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> active;
    for (int outer = 0; outer < 100; ++outer) {
        const double full_delta = sweep(all);
        active.clear();
        for (int j = 0; j < p; ++j)
            if (b[j] != 0.0) active.push_back(j);
        for (int inner = 0; inner < 1000; ++inner)
            if (sweep(active) <= tol) break;
        if (full_delta <= tol) return;
    }
}

class LassoPredictor final : public Predictor {
  public:
    explicit LassoPredictor(LassoSolution sol) : sol_(std::move(sol)) {}
    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != sol_.coef.size())
            throw ValidationError("predict: covariate dimension mismatch");
        return sol_.intercept + x.dot(sol_.coef);
    }
    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        return (x * sol_.coef).array() + sol_.intercept;
    }
    int model_size() const override {
        return 1 + static_cast<int>((sol_.coef.array() != 0.0).count());
    }
    const LassoSolution& solution() const { return sol_; }

  private:
    LassoSolution sol_;
};

LassoSolution unstandardize(const Standardized& s, const Eigen::VectorXd& b, double lambda) {
    const int p = static_cast<int>(b.size());
    LassoSolution sol;
    sol.lambda = lambda;
    sol.coef = Eigen::VectorXd::Zero(p);
    sol.intercept = s.y_mean;
    for (int j = 0; j < p; ++j) {
        if (s.sd[j] > 0.0 && b[j] != 0.0) {
            sol.coef[j] = b[j] / s.sd[j];
            sol.intercept -= sol.coef[j] * s.mean[j];
        }
    }
    return sol;
}

std::vector<double> lambda_grid(double lambda_max, int n_points, double decades) {
    std::vector<double> grid(n_points);
    for (int g = 0; g < n_points; ++g)
        grid[g] = lambda_max * std::pow(10.0, -decades * g / (n_points - 1));
    return grid;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const auto s = standardize(x, y);
    const int m = static_cast<int>(x.rows());
    double lm = 0.0;
    for (int j = 0; j < x.cols(); ++j)
        lm = std::max(lm, std::abs(s.xs.col(j).dot(s.yc)) / m);
    return lm;
}

PredictorPtr fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const AdjusterHyper& hyper, Rng& rng) {
    const int m = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    if (m < 2) throw EstimationError("lasso: needs at least 2 points");

    const auto s = standardize(x, y);
    const double sd_y = std::sqrt(s.yc.squaredNorm() / m);
    const double tol = 1e-7 * std::max(sd_y, 1e-12);

    double lambda_max = 0.0;
    for (int j = 0; j < p; ++j)
        lambda_max = std::max(lambda_max, std::abs(s.xs.col(j).dot(s.yc)) / m);
    if (lambda_max <= 0.0)
        return std::make_shared<LassoPredictor>(
            unstandardize(s, Eigen::VectorXd::Zero(p), 0.0));

    double lambda = hyper.lambda;
    if (lambda < 0.0) {
        // 5-fold CV over a descending log grid, CV-min rule.
        const auto grid = lambda_grid(lambda_max, hyper.lasso_grid, hyper.lasso_decades);
        const int folds = std::min(hyper.lasso_cv_folds, m);
        std::vector<int> fold_of(m);
        for (int i = 0; i < m; ++i) fold_of[i] = i % folds;
        std::shuffle(fold_of.begin(), fold_of.end(), rng);

        std::vector<double> cv_sse(grid.size(), 0.0);
        for (int f = 0; f < folds; ++f) {
            std::vector<int> tr, va;
            for (int i = 0; i < m; ++i) (fold_of[i] == f ? va : tr).push_back(i);
            if (tr.empty() || va.empty()) continue;
            Eigen::MatrixXd xt(tr.size(), p);
            Eigen::VectorXd yt(tr.size());
            for (std::size_t r = 0; r < tr.size(); ++r) {
                xt.row(r) = x.row(tr[r]);
                yt[r] = y[tr[r]];
            }
            const auto st = standardize(xt, yt);
            Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd residual = st.yc;
            for (std::size_t g = 0; g < grid.size(); ++g) {
                coordinate_descent(st.xs, residual, b, grid[g], tol);
                const auto sol = unstandardize(st, b, grid[g]);
                for (int i : va) {
                    const double e = y[i] - (sol.intercept + x.row(i).dot(sol.coef));
                    cv_sse[g] += e * e;
                }
            }
        }
        std::size_t best = 0;
        for (std::size_t g = 1; g < grid.size(); ++g)
            if (cv_sse[g] < cv_sse[best]) best = g;
        lambda = grid[best];
    }

    // Final fit: warm-started path from lambda_max down to the target.
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd residual = s.yc;
    if (lambda < lambda_max) {
        const auto grid = lambda_grid(lambda_max, hyper.lasso_grid, hyper.lasso_decades);
        for (double g : grid) {
            if (g <= lambda) break;
            coordinate_descent(s.xs, residual, b, g, tol);
        }
    }
    coordinate_descent(s.xs, residual, b, lambda, tol);
    return std::make_shared<LassoPredictor>(unstandardize(s, b, lambda));
}

const LassoSolution& lasso_solution(const Predictor& pred) {
    const auto* lp = dynamic_cast<const LassoPredictor*>(&pred);
    if (!lp) throw ValidationError("predictor is not a lasso fit");
    return lp->solution();
}

}  // namespace stratadjust
