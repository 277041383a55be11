#include <cmath>

#include "solve_detail.hpp"
#include "stratadjust/adjusters.hpp"

namespace stratadjust {

namespace {

// Local linear regression with a product Epanechnikov kernel and a diagonal
// rule-of-thumb bandwidth. The prediction at x is the fitted intercept of
// the weighted least squares problem on centered covariates.
class LocalLinearPredictor final : public Predictor {
  public:
    LocalLinearPredictor(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXd bandwidth,
                         PredictorPtr global_ols)
        : x_(std::move(x)),
          y_(std::move(y)),
          bandwidth_(std::move(bandwidth)),
          global_ols_(std::move(global_ols)) {}

    double predict(const Eigen::RowVectorXd& q) const override {
        const int d = static_cast<int>(x_.cols());
        if (q.size() != d) throw ValidationError("predict: covariate dimension mismatch");
        const int m = static_cast<int>(x_.rows());

        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d + 1, d + 1);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + 1);
        Eigen::VectorXd z(d + 1);
        double weight_sum = 0.0;
        for (int i = 0; i < m; ++i) {
            double w = 1.0;
            for (int j = 0; j < d; ++j) {
                const double u = (x_(i, j) - q[j]) / bandwidth_[j];
                const double f = 1.0 - u * u;
                if (f <= 0.0) { w = 0.0; break; }
                w *= 0.75 * f;
            }
            if (w <= 0.0) continue;
            weight_sum += w;
            z[0] = 1.0;
            for (int j = 0; j < d; ++j) z[j + 1] = x_(i, j) - q[j];
            gram.selfadjointView<Eigen::Lower>().rankUpdate(z, w);
            rhs.noalias() += (w * y_[i]) * z;
        }
        if (weight_sum <= 0.0) return global_ols_->predict(q); // query outside all windows
        gram.triangularView<Eigen::Upper>() = gram.transpose();
        return detail::solve_sym_jittered(std::move(gram), rhs)[0];
    }

    int model_size() const override { return static_cast<int>(x_.rows()); }

  private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    Eigen::VectorXd bandwidth_;
    PredictorPtr global_ols_;
};

}  // namespace

PredictorPtr fit_local_linear_kernel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const AdjusterHyper& hyper) {
    const int m = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    if (m < d + 2) throw EstimationError("local linear kernel: needs at least d+2 points");

    Eigen::VectorXd bandwidth(d);
    const double rate = std::pow(static_cast<double>(m), -1.0 / (d + 4));
    for (int j = 0; j < d; ++j) {
        const double mean = x.col(j).mean();
        const double var = (x.col(j).array() - mean).square().sum() / std::max(1, m - 1);
        const double sd = std::sqrt(var);
        bandwidth[j] = sd > 0.0 ? hyper.bandwidth_scale * 1.06 * sd * rate : 1.0;
    }
    return std::make_shared<LocalLinearPredictor>(x, y, std::move(bandwidth), fit_ols(x, y));
}

}  // namespace stratadjust
