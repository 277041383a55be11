#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stratadjust/datagen.hpp"
#include "stratadjust/estimators.hpp"
#include "stratadjust/rng.hpp"
#include "stratadjust/trial_data.hpp"

namespace stratadjust {

enum class AdjusterKind {
    zero,
    ols,
    lasso,
    local_linear_kernel,
    natural_spline,
    cart,
    random_forest,
    gbrt,
    mlp,
    oracle
};

AdjusterKind adjuster_kind_from_string(const std::string& s);
std::string to_string(AdjusterKind k);

struct AdjusterHyper {
    // local linear kernel: multiplies the rule-of-thumb bandwidth
    // h_j = 1.06 * sd_j * m^(-1/(d+4)).
    double bandwidth_scale = 1.0;
    // lasso: lambda >= 0 fixes the penalty; negative selects it by
    // cross-validation over a log grid below lambda_max.
    double lambda = -1.0;
    int lasso_cv_folds = 5;
    int lasso_grid = 50;
    double lasso_decades = 4.0;
    // trees
    int cart_max_depth = 6;
    int cart_min_leaf = 10;
    int rf_trees = 200;
    int rf_min_leaf = 5;
    int rf_mtry = 0; // 0 -> ceil(p/3)
    int gbrt_rounds = 200;
    int gbrt_depth = 3;
    double gbrt_shrinkage = 0.1;
    int gbrt_min_leaf = 10;
    // mlp: one tanh hidden layer, full-batch gradient descent
    int mlp_width = 10;
    int mlp_epochs = 500;
    double mlp_lr = 0.01;
    double mlp_weight_decay = 0.01;
    // natural spline: basis size per continuous covariate
    int spline_df = 5;

    void set(const std::string& key, const std::string& value);
};

struct AdjusterSpec {
    AdjusterKind kind = AdjusterKind::zero;
    bool stratum_specific = false;
    AdjusterHyper hyper;
    // oracle kind evaluates the generating model's conditional mean
    std::optional<ModelSpec> oracle_model;

    std::string label() const;
};

// An immutable fitted prediction function; predict is deterministic and
// reentrant.
class Predictor {
  public:
    virtual ~Predictor() = default;
    virtual double predict(const Eigen::RowVectorXd& x) const = 0;
    virtual Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const;
    virtual int model_size() const { return 0; }
};

using PredictorPtr = std::shared_ptr<const Predictor>;

// Fitted projection functions h(x, a) for both arms, optionally per
// stratum. A null per-stratum slot falls back to the pooled fit.
struct ProjectionFit {
    std::array<PredictorPtr, 2> pooled;
    std::array<std::vector<PredictorPtr>, 2> per_stratum;
    int trained_p = 0;
    std::array<double, 2> in_sample_mse{0.0, 0.0};
    std::array<int, 2> model_size{0, 0};
    std::string label;

    double predict(const Eigen::RowVectorXd& x, int arm, int stratum) const;
    // Routed predictions for every unit of ds under the given arm.
    Eigen::VectorXd predict_all(const TrialDataset& ds, int arm) const;
};

// Fits the projection function for each arm on that arm's units (and per
// stratum cell when spec.stratum_specific; undersized cells fall back to
// the pooled fit).
ProjectionFit fit(const AdjusterSpec& spec, const TrialDataset& ds, Rng& rng);

// Convenience: fit already done, compute the adjusted estimator.
EffectEstimate adjusted_estimate(const TrialDataset& ds, const ProjectionFit& fit,
                                 double level = 0.95);

// Per-subset fitters (x: m x d training covariates, y: m outcomes).
PredictorPtr fit_zero();
PredictorPtr fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
PredictorPtr fit_local_linear_kernel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const AdjusterHyper& hyper);
PredictorPtr fit_natural_spline(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const AdjusterHyper& hyper);
PredictorPtr fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const AdjusterHyper& hyper, Rng& rng);
PredictorPtr fit_tree_family(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             AdjusterKind kind, const AdjusterHyper& hyper, Rng& rng);
PredictorPtr fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const AdjusterHyper& hyper, Rng& rng);

// Smallest lambda that zeroes every slope; the top of the lasso grid.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Lasso coefficients on the original scale (intercept first).
struct LassoSolution {
    double intercept = 0.0;
    Eigen::VectorXd coef;
    double lambda = 0.0;
};
const LassoSolution& lasso_solution(const Predictor& pred);

// MLP internals, exposed so the analytic gradient can be checked against
// finite differences.
struct MlpParams {
    Eigen::MatrixXd w1; // d x width
    Eigen::VectorXd b1; // width
    Eigen::VectorXd w2; // width
    double b2 = 0.0;
};
double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                double weight_decay);
MlpParams mlp_gradient(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       double weight_decay);

// Minimum training subset size for a kind at covariate dimension d.
int min_subset_size(AdjusterKind kind, int d, const AdjusterHyper& hyper);

}  // namespace stratadjust
