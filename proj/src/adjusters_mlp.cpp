#include <cmath>

#include "stratadjust/adjusters.hpp"

namespace stratadjust {

namespace {

Eigen::MatrixXd hidden_activations(const MlpParams& p, const Eigen::MatrixXd& x) {
    return (((x * p.w1).rowwise() + p.b1.transpose()).array().tanh()).matrix();
}

class MlpPredictor final : public Predictor {
  public:
    MlpPredictor(MlpParams params, Eigen::VectorXd x_mean, Eigen::VectorXd x_sd,
                 double y_mean, double y_sd)
        : params_(std::move(params)),
          x_mean_(std::move(x_mean)),
          x_sd_(std::move(x_sd)),
          y_mean_(y_mean),
          y_sd_(y_sd) {}

    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != x_mean_.size())
            throw ValidationError("predict: covariate dimension mismatch");
        Eigen::RowVectorXd xs = (x - x_mean_.transpose()).cwiseQuotient(x_sd_.transpose());
        const Eigen::RowVectorXd h =
            ((xs * params_.w1) + params_.b1.transpose()).array().tanh().matrix();
        return (h.dot(params_.w2) + params_.b2) * y_sd_ + y_mean_;
    }

    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        Eigen::MatrixXd xs =
            (x.rowwise() - x_mean_.transpose()).array().rowwise() /
            x_sd_.transpose().array();
        Eigen::MatrixXd h = hidden_activations(params_, xs);
        return ((h * params_.w2).array() + params_.b2) * y_sd_ + y_mean_;
    }

    int model_size() const override {
        return static_cast<int>(params_.w1.size() + params_.b1.size() + params_.w2.size()) + 1;
    }

  private:
    MlpParams params_;
    Eigen::VectorXd x_mean_, x_sd_;
    double y_mean_, y_sd_;
};

}  // namespace

double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                double weight_decay) {
    const double m = static_cast<double>(x.rows());
    const Eigen::MatrixXd h = hidden_activations(p, x);
    const Eigen::VectorXd yhat = (h * p.w2).array() + p.b2;
    const double mse = (yhat - y).squaredNorm() / (2.0 * m);
    const double penalty =
        0.5 * weight_decay * (p.w1.squaredNorm() + p.w2.squaredNorm());
    return mse + penalty;
}

MlpParams mlp_gradient(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       double weight_decay) {
    const double m = static_cast<double>(x.rows());
    const Eigen::MatrixXd h = hidden_activations(p, x);
    const Eigen::VectorXd err = ((h * p.w2).array() + p.b2 - y.array()) / m;
    MlpParams g;
    g.w2 = h.transpose() * err + weight_decay * p.w2;
    g.b2 = err.sum();
    const Eigen::MatrixXd delta =
        (err * p.w2.transpose()).cwiseProduct((1.0 - h.array().square()).matrix());
    g.w1 = x.transpose() * delta + weight_decay * p.w1;
    g.b1 = delta.colwise().sum();
    return g;
}

PredictorPtr fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const AdjusterHyper& hyper, Rng& rng) {
    const int m = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    if (m < 20) throw EstimationError("mlp: needs at least 20 points");
    const int width = hyper.mlp_width;

    Eigen::VectorXd x_mean(d), x_sd(d);
    for (int j = 0; j < d; ++j) {
        x_mean[j] = x.col(j).mean();
        const double var = (x.col(j).array() - x_mean[j]).square().sum() / m;
        x_sd[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    const double y_mean = y.mean();
    const double y_var = (y.array() - y_mean).square().sum() / m;
    const double y_sd = y_var > 0.0 ? std::sqrt(y_var) : 1.0;

    Eigen::MatrixXd xs = (x.rowwise() - x_mean.transpose()).array().rowwise() /
                         x_sd.transpose().array();
    Eigen::VectorXd ys = (y.array() - y_mean) / y_sd;

    MlpParams p;
    const double r1 = std::sqrt(6.0 / (d + width));
    const double r2 = std::sqrt(6.0 / (width + 1));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    p.w1.resize(d, width);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < width; ++k) p.w1(j, k) = r1 * u(rng);
    p.b1 = Eigen::VectorXd::Zero(width);
    p.w2.resize(width);
    for (int k = 0; k < width; ++k) p.w2[k] = r2 * u(rng);
    p.b2 = 0.0;

    for (int epoch = 0; epoch < hyper.mlp_epochs; ++epoch) {
        const MlpParams g = mlp_gradient(p, xs, ys, hyper.mlp_weight_decay);
        p.w1 -= hyper.mlp_lr * g.w1;
        p.b1 -= hyper.mlp_lr * g.b1;
        p.w2 -= hyper.mlp_lr * g.w2;
        p.b2 -= hyper.mlp_lr * g.b2;
    }
    return std::make_shared<MlpPredictor>(std::move(p), std::move(x_mean), std::move(x_sd),
                                          y_mean, y_sd);
}

}  // namespace stratadjust
