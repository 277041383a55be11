#include "stratadjust/adjusters.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "solve_detail.hpp"

namespace stratadjust {

AdjusterKind adjuster_kind_from_string(const std::string& s) {
    if (s == "zero" || s == "none") return AdjusterKind::zero;
    if (s == "ols" || s == "linear") return AdjusterKind::ols;
    if (s == "lasso") return AdjusterKind::lasso;
    if (s == "kernel" || s == "local_linear_kernel") return AdjusterKind::local_linear_kernel;
    if (s == "nspline" || s == "natural_spline") return AdjusterKind::natural_spline;
    if (s == "cart" || s == "rpart") return AdjusterKind::cart;
    if (s == "rf" || s == "random_forest") return AdjusterKind::random_forest;
    if (s == "gbrt") return AdjusterKind::gbrt;
    if (s == "mlp" || s == "nnet") return AdjusterKind::mlp;
    if (s == "oracle") return AdjusterKind::oracle;
    throw ValidationError("unknown adjuster '" + s + "'");
}

std::string to_string(AdjusterKind k) {
    switch (k) {
        case AdjusterKind::zero: return "zero";
        case AdjusterKind::ols: return "ols";
        case AdjusterKind::lasso: return "lasso";
        case AdjusterKind::local_linear_kernel: return "kernel";
        case AdjusterKind::natural_spline: return "nspline";
        case AdjusterKind::cart: return "cart";
        case AdjusterKind::random_forest: return "rf";
        case AdjusterKind::gbrt: return "gbrt";
        case AdjusterKind::mlp: return "mlp";
        case AdjusterKind::oracle: return "oracle";
    }
    return "?";
}

void AdjusterHyper::set(const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    if (key == "bandwidth_scale") bandwidth_scale = as_double();
    else if (key == "lambda") lambda = as_double();
    else if (key == "lasso_cv_folds") lasso_cv_folds = as_int();
    else if (key == "lasso_grid") lasso_grid = as_int();
    else if (key == "lasso_decades") lasso_decades = as_double();
    else if (key == "cart_max_depth") cart_max_depth = as_int();
    else if (key == "cart_min_leaf") cart_min_leaf = as_int();
    else if (key == "rf_trees") rf_trees = as_int();
    else if (key == "rf_min_leaf") rf_min_leaf = as_int();
    else if (key == "rf_mtry") rf_mtry = as_int();
    else if (key == "gbrt_rounds") gbrt_rounds = as_int();
    else if (key == "gbrt_depth") gbrt_depth = as_int();
    else if (key == "gbrt_shrinkage") gbrt_shrinkage = as_double();
    else if (key == "gbrt_min_leaf") gbrt_min_leaf = as_int();
    else if (key == "mlp_width") mlp_width = as_int();
    else if (key == "mlp_epochs") mlp_epochs = as_int();
    else if (key == "mlp_lr") mlp_lr = as_double();
    else if (key == "mlp_weight_decay") mlp_weight_decay = as_double();
    else if (key == "spline_df") spline_df = as_int();
    else throw ValidationError("unknown hyperparameter '" + key + "'");
}

std::string AdjusterSpec::label() const {
    std::string s = to_string(kind);
    if (stratum_specific) s += "/stratum";
    return s;
}

Eigen::VectorXd Predictor::predict_all(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
}

int min_subset_size(AdjusterKind kind, int d, const AdjusterHyper& hyper) {
    switch (kind) {
        case AdjusterKind::zero:
        case AdjusterKind::oracle: return 1;
        case AdjusterKind::ols:
        case AdjusterKind::local_linear_kernel: return d + 2;
        case AdjusterKind::lasso: return 2;
        case AdjusterKind::cart: return 2 * hyper.cart_min_leaf;
        case AdjusterKind::random_forest: return 2 * hyper.rf_min_leaf;
        case AdjusterKind::gbrt: return 2 * hyper.gbrt_min_leaf;
        case AdjusterKind::mlp: return 20;
        case AdjusterKind::natural_spline: return hyper.spline_df * d + 2;
    }
    return 2;
}

namespace {

class ZeroPredictor final : public Predictor {
  public:
    double predict(const Eigen::RowVectorXd&) const override { return 0.0; }
    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        return Eigen::VectorXd::Zero(x.rows());
    }
};

class LinearPredictor final : public Predictor {
  public:
    LinearPredictor(double intercept, Eigen::VectorXd coef)
        : intercept_(intercept), coef_(std::move(coef)) {}
    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != coef_.size())
            throw ValidationError("predict: covariate dimension mismatch");
        return intercept_ + x.dot(coef_);
    }
    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        return (x * coef_).array() + intercept_;
    }
    int model_size() const override { return static_cast<int>(coef_.size()) + 1; }

  private:
    double intercept_;
    Eigen::VectorXd coef_;
};

class OraclePredictor final : public Predictor {
  public:
    OraclePredictor(int model_id, int arm, double stratum_value, int base_p)
        : model_id_(model_id), arm_(arm), stratum_value_(stratum_value), base_p_(base_p) {}
    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() < base_p_)
            throw ValidationError("predict: covariate dimension mismatch");
        return oracle_mean(model_id_, arm_, x, stratum_value_);
    }

  private:
    int model_id_, arm_;
    double stratum_value_;
    int base_p_;
};

std::vector<double> parse_stratum_values(const TrialDataset& ds) {
    std::vector<double> values;
    auto it = ds.metadata.find("stratum_values");
    if (it != ds.metadata.end()) {
        std::istringstream is(it->second);
        std::string tok;
        while (std::getline(is, tok, ',')) values.push_back(std::stod(tok));
    }
    while (static_cast<int>(values.size()) < ds.num_strata)
        values.push_back(static_cast<double>(values.size() + 1));
    return values;
}

}  // namespace

PredictorPtr fit_zero() { return std::make_shared<ZeroPredictor>(); }

PredictorPtr fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const int m = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    if (m < 1) throw EstimationError("ols: empty training subset");
    Eigen::MatrixXd design(m, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = x;
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::VectorXd rhs = design.transpose() * y;
    Eigen::VectorXd sol = detail::solve_sym_jittered(std::move(gram), rhs);
    return std::make_shared<LinearPredictor>(sol[0], sol.tail(d));
}

double ProjectionFit::predict(const Eigen::RowVectorXd& x, int arm, int stratum) const {
    const auto& cell = per_stratum[arm];
    if (stratum >= 1 && stratum <= static_cast<int>(cell.size()) && cell[stratum - 1])
        return cell[stratum - 1]->predict(x);
    return pooled[arm]->predict(x);
}

Eigen::VectorXd ProjectionFit::predict_all(const TrialDataset& ds, int arm) const {
    if (ds.p() != trained_p)
        throw ValidationError("predict: covariate dimension mismatch");
    if (per_stratum[arm].empty()) return pooled[arm]->predict_all(ds.x);
    Eigen::VectorXd out(ds.n());
    for (int i = 0; i < ds.n(); ++i) out[i] = predict(ds.x.row(i), arm, ds.stratum[i]);
    return out;
}

ProjectionFit fit(const AdjusterSpec& spec, const TrialDataset& ds, Rng& rng) {
    if (!ds.assigned() || ds.y.size() != ds.n())
        throw EstimationError("fit: dataset has no assignments/outcomes");
    const int n = ds.n();
    const int d = ds.p();

    ProjectionFit out;
    out.trained_p = d;
    out.label = spec.label();

    if (spec.kind == AdjusterKind::zero) {
        out.pooled = {fit_zero(), fit_zero()};
        return out;
    }
    if (spec.kind == AdjusterKind::oracle) {
        if (!spec.oracle_model) throw ValidationError("oracle adjuster requires a model spec");
        const auto values = parse_stratum_values(ds);
        const int base_p = spec.oracle_model->base_p();
        for (int a = 0; a < 2; ++a) {
            out.per_stratum[a].resize(ds.num_strata);
            for (int k = 0; k < ds.num_strata; ++k)
                out.per_stratum[a][k] = std::make_shared<OraclePredictor>(
                    spec.oracle_model->id, a, values[k], base_p);
            out.pooled[a] = out.per_stratum[a][0];
        }
        return out;
    }

    // Independent seed streams per (arm, cell) so one arm's fit can never
    // influence the other's.
    const std::uint64_t seed_pool[2] = {rng(), rng()};
    std::vector<std::array<std::uint64_t, 2>> seed_cell;
    if (spec.stratum_specific) {
        seed_cell.resize(ds.num_strata);
        for (int k = 0; k < ds.num_strata; ++k)
            for (int a = 0; a < 2; ++a) seed_cell[k][a] = rng();
    }

    auto fit_subset = [&](const std::vector<int>& rows, std::uint64_t seed) -> PredictorPtr {
        Eigen::MatrixXd xs(rows.size(), d);
        Eigen::VectorXd ys(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            xs.row(r) = ds.x.row(rows[r]);
            ys[r] = ds.y[rows[r]];
        }
        Rng sub = make_rng(seed);
        switch (spec.kind) {
            case AdjusterKind::ols: return fit_ols(xs, ys);
            case AdjusterKind::lasso: return fit_lasso(xs, ys, spec.hyper, sub);
            case AdjusterKind::local_linear_kernel:
                return fit_local_linear_kernel(xs, ys, spec.hyper);
            case AdjusterKind::natural_spline: return fit_natural_spline(xs, ys, spec.hyper);
            case AdjusterKind::cart:
            case AdjusterKind::random_forest:
            case AdjusterKind::gbrt:
                return fit_tree_family(xs, ys, spec.kind, spec.hyper, sub);
            case AdjusterKind::mlp: return fit_mlp(xs, ys, spec.hyper, sub);
            default: break;
        }
        throw ValidationError("unsupported adjuster kind");
    };

    std::array<std::vector<int>, 2> arm_rows;
    for (int i = 0; i < n; ++i) arm_rows[ds.arm[i]].push_back(i);
    const int kind_min = min_subset_size(spec.kind, d, spec.hyper);
    for (int a = 0; a < 2; ++a) {
        if (static_cast<int>(arm_rows[a].size()) < kind_min)
            throw EstimationError("arm " + std::to_string(a) + " has " +
                                  std::to_string(arm_rows[a].size()) +
                                  " units, fewer than the adjuster minimum " +
                                  std::to_string(kind_min));
        out.pooled[a] = fit_subset(arm_rows[a], seed_pool[a]);
    }

    if (spec.stratum_specific) {
        const int cell_min = std::max(kind_min, 10);
        for (int a = 0; a < 2; ++a) out.per_stratum[a].assign(ds.num_strata, nullptr);
        std::vector<std::vector<int>> cell_rows(ds.num_strata);
        for (int a = 0; a < 2; ++a) {
            for (auto& c : cell_rows) c.clear();
            for (int i : arm_rows[a]) cell_rows[ds.stratum[i] - 1].push_back(i);
            for (int k = 0; k < ds.num_strata; ++k)
                if (static_cast<int>(cell_rows[k].size()) >= cell_min)
                    out.per_stratum[a][k] = fit_subset(cell_rows[k], seed_cell[k][a]);
        }
    }

    // Training diagnostics on each arm's own units.
    for (int a = 0; a < 2; ++a) {
        double sse = 0.0;
        for (int i : arm_rows[a]) {
            const double e = ds.y[i] - out.predict(ds.x.row(i), a, ds.stratum[i]);
            sse += e * e;
        }
        out.in_sample_mse[a] = sse / arm_rows[a].size();
        out.model_size[a] = out.pooled[a]->model_size();
    }
    return out;
}

EffectEstimate adjusted_estimate(const TrialDataset& ds, const ProjectionFit& fit,
                                 double level) {
    EffectEstimate est =
        adjusted_estimate(ds, fit.predict_all(ds, 1), fit.predict_all(ds, 0), level);
    est.method = fit.label;
    return est;
}

}  // namespace stratadjust
