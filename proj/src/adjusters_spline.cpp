#include <algorithm>
#include <cmath>
#include <vector>

#include "solve_detail.hpp"
#include "stratadjust/adjusters.hpp"

namespace stratadjust {

namespace {

// Natural cubic spline basis for one covariate with knots xi_1 < ... < xi_K:
// N_1(x) = x, N_{k+1}(x) = d_k(x) - d_{K-1}(x) for k = 1..K-2, where
// d_k(x) = [(x - xi_k)^3_+ - (x - xi_K)^3_+] / (xi_K - xi_k). Linearity is
// enforced beyond the boundary knots.
struct SplineBasis {
    std::vector<double> knots; // empty -> covariate enters linearly

    int size() const {
        return knots.size() >= 3 ? static_cast<int>(knots.size()) - 1 : 1;
    }

    void eval(double x, double* out) const {
        out[0] = x;
        if (knots.size() < 3) return;
        const int K = static_cast<int>(knots.size());
        const double xi_last = knots[K - 1];
        auto cube_pos = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
        auto d = [&](int k) {
            return (cube_pos(x - knots[k]) - cube_pos(x - xi_last)) / (xi_last - knots[k]);
        };
        const double d_last = d(K - 2);
        for (int k = 0; k + 2 < K; ++k) out[k + 1] = d(k) - d_last;
    }
};

class SplinePredictor final : public Predictor {
  public:
    SplinePredictor(std::vector<SplineBasis> bases, double intercept, Eigen::VectorXd coef)
        : bases_(std::move(bases)), intercept_(intercept), coef_(std::move(coef)) {}

    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != static_cast<Eigen::Index>(bases_.size()))
            throw ValidationError("predict: covariate dimension mismatch");
        double out = intercept_;
        int col = 0;
        double buf[64];
        for (std::size_t j = 0; j < bases_.size(); ++j) {
            bases_[j].eval(x[j], buf);
            for (int b = 0; b < bases_[j].size(); ++b) out += coef_[col++] * buf[b];
        }
        return out;
    }

    int model_size() const override { return static_cast<int>(coef_.size()) + 1; }

  private:
    std::vector<SplineBasis> bases_;
    double intercept_;
    Eigen::VectorXd coef_;
};

}  // namespace

PredictorPtr fit_natural_spline(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const AdjusterHyper& hyper) {
    const int m = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    const int df = std::min(hyper.spline_df, 62);
    if (m < 2) throw EstimationError("natural spline: needs at least 2 points");

    std::vector<SplineBasis> bases(d);
    std::vector<double> sorted;
    for (int j = 0; j < d; ++j) {
        sorted.assign(x.col(j).data(), x.col(j).data() + m);
        std::sort(sorted.begin(), sorted.end());
        int distinct = 1;
        for (int i = 1; i < m; ++i) distinct += sorted[i] != sorted[i - 1];
        // Few distinct values: treat as discrete, enter linearly.
        if (distinct <= 10 || distinct <= df + 1) continue;
        std::vector<double> knots;
        for (int k = 0; k <= df; ++k) {
            const double pos = static_cast<double>(k) / df * (m - 1);
            const int lo = static_cast<int>(pos);
            const double frac = pos - lo;
            const double v = lo + 1 < m ? (1 - frac) * sorted[lo] + frac * sorted[lo + 1]
                                        : sorted[lo];
            if (knots.empty() || v > knots.back()) knots.push_back(v);
        }
        if (knots.size() >= 3) bases[j].knots = std::move(knots);
    }

    int n_cols = 0;
    for (const auto& b : bases) n_cols += b.size();
    Eigen::MatrixXd design(m, n_cols + 1);
    design.col(0).setOnes();
    {
        double buf[64];
        for (int i = 0; i < m; ++i) {
            int col = 1;
            for (int j = 0; j < d; ++j) {
                bases[j].eval(x(i, j), buf);
                for (int b = 0; b < bases[j].size(); ++b) design(i, col++) = buf[b];
            }
        }
    }

    // Scale columns to unit RMS before the normal-equation solve.
    Eigen::VectorXd scale(n_cols + 1);
    scale[0] = 1.0;
    for (int c = 1; c <= n_cols; ++c) {
        const double rms = std::sqrt(design.col(c).squaredNorm() / m);
        scale[c] = rms > 0.0 ? rms : 1.0;
        design.col(c) /= scale[c];
    }
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::VectorXd rhs = design.transpose() * y;
    Eigen::VectorXd sol = detail::solve_sym_jittered(std::move(gram), rhs);
    Eigen::VectorXd coef(n_cols);
    for (int c = 0; c < n_cols; ++c) coef[c] = sol[c + 1] / scale[c + 1];
    return std::make_shared<SplinePredictor>(std::move(bases), sol[0], std::move(coef));
}

}  // namespace stratadjust
