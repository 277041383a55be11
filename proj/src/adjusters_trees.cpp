#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stratadjust/adjusters.hpp"

namespace stratadjust {

namespace {

struct TreeNode {
    int feature = -1; // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::RowVectorXd& x) const {
        int id = 0;
        while (nodes[id].feature >= 0)
            id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left
                                                             : nodes[id].right;
        return nodes[id].value;
    }

    // Same traversal indexing a matrix row in place (no temporary row copy).
    double predict_mat(const Eigen::MatrixXd& x, int row) const {
        int id = 0;
        while (nodes[id].feature >= 0)
            id = x(row, nodes[id].feature) <= nodes[id].threshold ? nodes[id].left
                                                                  : nodes[id].right;
        return nodes[id].value;
    }

    int leaf_count() const {
        int c = 0;
        for (const auto& n : nodes) c += n.feature < 0;
        return c;
    }
};

// ---------------------------------------------------------------------------
// Exact-split CART (greedy variance reduction).

struct CartBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    int max_depth, min_leaf;
    Tree tree;
    std::vector<int> idx;
    std::vector<std::pair<double, double>> scratch; // (x, y) sorted per feature

    void run() {
        idx.resize(x.rows());
        std::iota(idx.begin(), idx.end(), 0);
        build(0, static_cast<int>(idx.size()), 0);
    }

    int build(int begin, int end, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const int n = end - begin;
        double sum = 0.0, sumsq = 0.0;
        for (int i = begin; i < end; ++i) {
            sum += y[idx[i]];
            sumsq += y[idx[i]] * y[idx[i]];
        }
        tree.nodes[node_id].value = sum / n;
        const double sse = sumsq - sum * sum / n;
        if (depth >= max_depth || n < 2 * min_leaf || sse <= 1e-12) return node_id;

        int best_feature = -1;
        double best_gain = 0.0, best_threshold = 0.0;
        for (int j = 0; j < x.cols(); ++j) {
            scratch.clear();
            for (int i = begin; i < end; ++i) scratch.emplace_back(x(idx[i], j), y[idx[i]]);
            std::sort(scratch.begin(), scratch.end());
            double left_sum = 0.0;
            for (int i = 1; i < n; ++i) {
                left_sum += scratch[i - 1].second;
                if (scratch[i].first == scratch[i - 1].first) continue;
                if (i < min_leaf || n - i < min_leaf) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / i + right_sum * right_sum / (n - i) -
                                    sum * sum / n;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = j;
                    best_threshold = 0.5 * (scratch[i - 1].first + scratch[i].first);
                }
            }
        }
        if (best_feature < 0) return node_id;

        const auto mid = std::partition(idx.begin() + begin, idx.begin() + end, [&](int i) {
            return x(i, best_feature) <= best_threshold;
        });
        const int split = static_cast<int>(mid - idx.begin());
        if (split == begin || split == end) return node_id; // numeric guard
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        const int left = build(begin, split, depth + 1);
        tree.nodes[node_id].left = left;
        tree.nodes[node_id].right = build(split, end, depth + 1);
        return node_id;
    }
};

// ---------------------------------------------------------------------------
// Histogram trees shared by random forest and gbrt. Feature values are
// quantile-binned once per fit; split search scans bin statistics.

constexpr int kMaxBins = 64;

struct BinnedFeatures {
    int m = 0, p = 0;
    std::vector<std::uint8_t> bin;         // column-major: feature j at bin[j*m + i]
    std::vector<std::vector<double>> cut;  // upper bin edges per feature

    void build(const Eigen::MatrixXd& x) {
        m = static_cast<int>(x.rows());
        p = static_cast<int>(x.cols());
        bin.resize(static_cast<std::size_t>(m) * p);
        cut.assign(p, {});
        std::vector<double> sorted(m);
        for (int j = 0; j < p; ++j) {
            std::copy(x.col(j).data(), x.col(j).data() + m, sorted.begin());
            std::sort(sorted.begin(), sorted.end());
            auto& c = cut[j];
            int distinct = 1;
            for (int i = 1; i < m; ++i) distinct += sorted[i] != sorted[i - 1];
            if (distinct <= kMaxBins) {
                c.push_back(sorted[0]);
                for (int i = 1; i < m; ++i)
                    if (sorted[i] != sorted[i - 1]) c.push_back(sorted[i]);
            } else {
                for (int b = 1; b <= kMaxBins; ++b) {
                    const double v = sorted[static_cast<std::size_t>(b) * m / kMaxBins - 1];
                    if (c.empty() || v > c.back()) c.push_back(v);
                }
                c.back() = sorted[m - 1];
            }
            for (int i = 0; i < m; ++i) {
                const auto it = std::lower_bound(c.begin(), c.end(), x(i, j));
                bin[static_cast<std::size_t>(j) * m + i] =
                    static_cast<std::uint8_t>(it - c.begin());
            }
        }
    }
};

struct HistTreeBuilder {
    const BinnedFeatures& bins;
    const Eigen::VectorXd& y;
    int max_depth, min_leaf, mtry; // mtry == 0: all features
    Rng* rng = nullptr;
    Tree tree;
    std::vector<int> idx; // sample indices (duplicates allowed for bootstrap)

    std::vector<int> feature_pool;
    double cnt_buf[kMaxBins];
    double sum_buf[kMaxBins];

    void run() {
        feature_pool.resize(bins.p);
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
        build(0, static_cast<int>(idx.size()), 0);
    }

    int build(int begin, int end, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const int n = end - begin;
        double sum = 0.0, sumsq = 0.0;
        for (int i = begin; i < end; ++i) {
            sum += y[idx[i]];
            sumsq += y[idx[i]] * y[idx[i]];
        }
        tree.nodes[node_id].value = sum / n;
        if (depth >= max_depth || n < 2 * min_leaf || sumsq - sum * sum / n <= 1e-12)
            return node_id;

        int n_try = mtry > 0 ? std::min(mtry, bins.p) : bins.p;
        if (n_try < bins.p) {
            for (int t = 0; t < n_try; ++t) {
                std::uniform_int_distribution<int> pick(t, bins.p - 1);
                std::swap(feature_pool[t], feature_pool[pick(*rng)]);
            }
            std::sort(feature_pool.begin(), feature_pool.begin() + n_try);
        }

        int best_feature = -1, best_bin = -1;
        double best_gain = 0.0;
        for (int t = 0; t < n_try; ++t) {
            const int j = feature_pool[t];
            const int n_bins = static_cast<int>(bins.cut[j].size());
            if (n_bins < 2) continue;
            std::fill(cnt_buf, cnt_buf + n_bins, 0.0);
            std::fill(sum_buf, sum_buf + n_bins, 0.0);
            const std::uint8_t* col = bins.bin.data() + static_cast<std::size_t>(j) * bins.m;
            for (int i = begin; i < end; ++i) {
                const int b = col[idx[i]];
                cnt_buf[b] += 1.0;
                sum_buf[b] += y[idx[i]];
            }
            double lc = 0.0, ls = 0.0;
            for (int b = 0; b + 1 < n_bins; ++b) {
                lc += cnt_buf[b];
                ls += sum_buf[b];
                if (lc < min_leaf) continue;
                const double rc = n - lc;
                if (rc < min_leaf) break;
                const double rs = sum - ls;
                const double gain = ls * ls / lc + rs * rs / rc - sum * sum / n;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = j;
                    best_bin = b;
                }
            }
        }
        if (best_feature < 0) return node_id;

        const std::uint8_t* col =
            bins.bin.data() + static_cast<std::size_t>(best_feature) * bins.m;
        const auto mid = std::partition(idx.begin() + begin, idx.begin() + end,
                                        [&](int i) { return col[i] <= best_bin; });
        const int split = static_cast<int>(mid - idx.begin());
        if (split == begin || split == end) return node_id;
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = bins.cut[best_feature][best_bin];
        const int left = build(begin, split, depth + 1);
        tree.nodes[node_id].left = left;
        tree.nodes[node_id].right = build(split, end, depth + 1);
        return node_id;
    }
};

// ---------------------------------------------------------------------------

class CartPredictor final : public Predictor {
  public:
    CartPredictor(Tree tree, int d) : tree_(std::move(tree)), d_(d) {}
    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != d_) throw ValidationError("predict: covariate dimension mismatch");
        return tree_.predict(x);
    }
    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = tree_.predict_mat(x, static_cast<int>(i));
        return out;
    }
    int model_size() const override { return tree_.leaf_count(); }

  private:
    Tree tree_;
    int d_;
};

class ForestPredictor final : public Predictor {
  public:
    ForestPredictor(std::vector<Tree> trees, int d) : trees_(std::move(trees)), d_(d) {}
    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != d_) throw ValidationError("predict: covariate dimension mismatch");
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict(x);
        return s / trees_.size();
    }
    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
        for (const auto& t : trees_)
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                out[i] += t.predict_mat(x, static_cast<int>(i));
        return out / static_cast<double>(trees_.size());
    }
    int model_size() const override {
        int c = 0;
        for (const auto& t : trees_) c += t.leaf_count();
        return c;
    }

  private:
    std::vector<Tree> trees_;
    int d_;
};

class BoostedPredictor final : public Predictor {
  public:
    BoostedPredictor(std::vector<Tree> trees, double init, double shrinkage, int d)
        : trees_(std::move(trees)), init_(init), shrinkage_(shrinkage), d_(d) {}
    double predict(const Eigen::RowVectorXd& x) const override {
        if (x.size() != d_) throw ValidationError("predict: covariate dimension mismatch");
        double s = init_;
        for (const auto& t : trees_) s += shrinkage_ * t.predict(x);
        return s;
    }
    Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const override {
        Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), init_);
        for (const auto& t : trees_)
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                out[i] += shrinkage_ * t.predict_mat(x, static_cast<int>(i));
        return out;
    }
    int model_size() const override {
        int c = 0;
        for (const auto& t : trees_) c += t.leaf_count();
        return c;
    }

  private:
    std::vector<Tree> trees_;
    double init_, shrinkage_;
    int d_;
};

}  // namespace

PredictorPtr fit_tree_family(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             AdjusterKind kind, const AdjusterHyper& hyper, Rng& rng) {
    const int m = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    if (m < min_subset_size(kind, d, hyper))
        throw EstimationError("tree fit: training subset below the minimum size");

    if (kind == AdjusterKind::cart) {
        CartBuilder builder{x, y, hyper.cart_max_depth, hyper.cart_min_leaf, {}, {}, {}};
        builder.run();
        return std::make_shared<CartPredictor>(std::move(builder.tree), d);
    }

    BinnedFeatures bins;
    bins.build(x);

    if (kind == AdjusterKind::random_forest) {
        const int mtry = hyper.rf_mtry > 0 ? hyper.rf_mtry : (d + 2) / 3;
        std::vector<Tree> trees;
        trees.reserve(hyper.rf_trees);
        std::uniform_int_distribution<int> draw(0, m - 1);
        for (int t = 0; t < hyper.rf_trees; ++t) {
            HistTreeBuilder builder{bins, y, 64, hyper.rf_min_leaf, mtry, &rng, {}, {}, {}, {}, {}};
            builder.idx.resize(m);
            for (int i = 0; i < m; ++i) builder.idx[i] = draw(rng); // bootstrap resample
            builder.run();
            trees.push_back(std::move(builder.tree));
        }
        return std::make_shared<ForestPredictor>(std::move(trees), d);
    }

    if (kind == AdjusterKind::gbrt) {
        const double init = y.mean();
        Eigen::VectorXd residual = y.array() - init;
        std::vector<Tree> trees;
        trees.reserve(hyper.gbrt_rounds);
        for (int r = 0; r < hyper.gbrt_rounds; ++r) {
            HistTreeBuilder builder{bins, residual, hyper.gbrt_depth, hyper.gbrt_min_leaf,
                                    0,    nullptr,  {},               {},
                                    {},   {},       {}};
            builder.idx.resize(m);
            std::iota(builder.idx.begin(), builder.idx.end(), 0);
            builder.run();
            for (int i = 0; i < m; ++i)
                residual[i] -= hyper.gbrt_shrinkage * builder.tree.predict_mat(x, i);
            trees.push_back(std::move(builder.tree));
        }
        return std::make_shared<BoostedPredictor>(std::move(trees), init, hyper.gbrt_shrinkage, d);
    }

    throw ValidationError("fit_tree_family: not a tree kind");
}

}  // namespace stratadjust
