#pragma once

#include "mlcast/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcast {

// Flat node storage; node 0 is the root. A node with feature < 0 is a leaf.
// Rows with x[feature] <= threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output
    double cover = 0.0;  // training weight reaching the node

    bool is_leaf() const noexcept { return feature < 0; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    std::size_t leaf_index(std::span<const double> x) const noexcept {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const auto& node = nodes[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                     : node.right);
        }
        return i;
    }

    double predict_row(std::span<const double> x) const noexcept { return nodes[leaf_index(x)].value; }

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (!nodes[i].is_leaf()) {
                stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
                stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
            }
        }
        return best;
    }

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

enum class SplitCriterion {
    variance,     // squared-error reduction, mean leaves
    second_order  // gradient/hessian gain, leaf weight -G/(H + lambda)
};

struct TreeParams {
    std::size_t max_depth = 6;
    std::size_t max_features = 0;  // features tried per split; 0 = all allowed
    std::size_t min_samples_leaf = 1;
    double reg_lambda = 1.0;
    double min_split_gain = 0.0;
    SplitCriterion criterion = SplitCriterion::variance;
};

namespace detail {

struct TreeBuilder {
    const Matrix& x;
    std::span<const double> grad;  // variance mode: targets; second-order mode: gradients
    std::span<const double> hess;  // empty in variance mode
    const TreeParams& params;
    std::span<const std::size_t> allowed;  // candidate feature indices, ascending
    Rng* rng;
    RegressionTree tree;

    bool second_order() const noexcept { return params.criterion == SplitCriterion::second_order; }

    // Node score: the quantity whose increase a split achieves.
    double score(double g, double h) const noexcept {
        if (second_order()) {
            return g * g / (h + params.reg_lambda);
        }
        return h > 0.0 ? g * g / h : 0.0;
    }

    double leaf_value(double g, double h) const noexcept {
        if (second_order()) {
            const double denom = h + params.reg_lambda;
            return denom > 0.0 ? -g / denom : 0.0;
        }
        return h > 0.0 ? g / h : 0.0;
    }

    double weight(std::size_t i) const noexcept { return second_order() ? hess[i] : 1.0; }

    int build(std::vector<std::size_t>& rows, std::size_t depth) {
        double g = 0.0;
        double h = 0.0;
        for (std::size_t i : rows) {
            g += grad[i];
            h += weight(i);
        }
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[static_cast<std::size_t>(id)].cover = h;
        tree.nodes[static_cast<std::size_t>(id)].value = leaf_value(g, h);
        if (depth >= params.max_depth || rows.size() < 2 * std::max<std::size_t>(params.min_samples_leaf, 1)) {
            return id;
        }

        std::vector<std::size_t> candidates(allowed.begin(), allowed.end());
        if (params.max_features != 0 && params.max_features < candidates.size() && rng != nullptr) {
            auto picks = rng->sample_without_replacement(candidates.size(), params.max_features);
            std::vector<std::size_t> chosen;
            for (auto k : picks) {
                chosen.push_back(candidates[k]);
            }
            std::sort(chosen.begin(), chosen.end());
            candidates = std::move(chosen);
        }

        const double parent = score(g, h);
        const double tol = 1e-12 * (1.0 + std::abs(parent));
        double best_gain = -std::numeric_limits<double>::infinity();
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> order(rows);
        const std::size_t min_leaf = std::max<std::size_t>(params.min_samples_leaf, 1);
        for (std::size_t f : candidates) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
            double gl = 0.0;
            double hl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                gl += grad[order[k]];
                hl += weight(order[k]);
                const double xa = x(order[k], f);
                const double xb = x(order[k + 1], f);
                if (!(xa < xb)) {
                    continue;
                }
                if (k + 1 < min_leaf || order.size() - k - 1 < min_leaf) {
                    continue;
                }
                const double gain = score(gl, hl) + score(g - gl, h - hl) - parent;
                // strict improvement keeps the lowest feature, then lowest threshold
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = xa + 0.5 * (xb - xa);
                    if (!(best_threshold < xb)) {
                        best_threshold = xa;  // adjacent doubles
                    }
                }
            }
        }
        const double required = second_order() ? 2.0 * params.min_split_gain : 0.0;
        if (best_feature < 0 || !(best_gain > required + tol)) {
            return id;
        }

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t i : rows) {
            (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }
};

inline std::vector<std::size_t> all_features(std::size_t p) {
    std::vector<std::size_t> f(p);
    std::iota(f.begin(), f.end(), std::size_t{0});
    return f;
}

}  // namespace detail

// Greedy exact CART on the given rows (all rows when `rows` is empty).
// Variance mode: pass targets as `y` and leave gradients empty. Second-order
// mode: gradients and hessians replace y.
inline RegressionTree fit_regression_tree(const Matrix& x, std::span<const double> y, const TreeParams& params,
                                          std::span<const double> gradients = {},
                                          std::span<const double> hessians = {}, Rng* rng = nullptr,
                                          std::vector<std::size_t> rows = {},
                                          std::span<const std::size_t> allowed_features = {}) {
    if (x.rows() == 0) {
        throw std::invalid_argument("fit_regression_tree: empty input");
    }
    const bool second = params.criterion == SplitCriterion::second_order;
    if (second) {
        if (gradients.size() != x.rows() || hessians.size() != x.rows()) {
            throw std::invalid_argument("fit_regression_tree: gradient/hessian length mismatch");
        }
    } else if (y.size() != x.rows()) {
        throw std::invalid_argument("fit_regression_tree: target length mismatch");
    }
    if (rows.empty()) {
        rows.resize(x.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    const auto features = detail::all_features(x.cols());
    if (allowed_features.empty()) {
        allowed_features = features;
    }
    detail::TreeBuilder builder{x, second ? gradients : y, second ? hessians : std::span<const double>{},
                                params, allowed_features, rng, {}};
    builder.build(rows, 0);
    return std::move(builder.tree);
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct ForestParams {
    std::size_t n_estimators = 100;
    std::size_t max_depth = 9;
    std::size_t max_features = 0;  // 0 = all features
    std::size_t min_samples_leaf = 1;
    std::uint64_t seed = 0;
};

struct ForestModel {
    std::vector<RegressionTree> trees;
    std::size_t n_features = 0;

    double predict_row(std::span<const double> x) const noexcept {
        double s = 0.0;
        for (const auto& t : trees) {
            s += t.predict_row(x);
        }
        return s / static_cast<double>(trees.size());
    }

    friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

// Bagged CART: each tree sees a size-n bootstrap and tries max_features
// random features per split. Tree t uses the RNG stream (seed, t).
inline ForestModel fit_random_forest(const Matrix& x, std::span<const double> y, const ForestParams& params) {
    if (params.n_estimators < 1) {
        throw std::invalid_argument("random forest: n_estimators must be >= 1");
    }
    if (params.max_features > x.cols()) {
        throw std::invalid_argument("random forest: max_features " + std::to_string(params.max_features) +
                                    " exceeds feature count " + std::to_string(x.cols()));
    }
    if (x.rows() == 0 || y.size() != x.rows()) {
        throw std::invalid_argument("random forest: empty input or length mismatch");
    }
    ForestModel model;
    model.n_features = x.cols();
    model.trees.resize(params.n_estimators);
    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.max_features = params.max_features;
    tp.min_samples_leaf = params.min_samples_leaf;
    parallel_for(params.n_estimators, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> boot(x.rows());
        for (auto& b : boot) {
            b = rng.below(x.rows());
        }
        model.trees[t] = fit_regression_tree(x, y, tp, {}, {}, &rng, std::move(boot));
    });
    return model;
}

// ---------------------------------------------------------------------------
// Gradient boosting (squared loss, second-order splits)
// ---------------------------------------------------------------------------

struct BoostParams {
    double learning_rate = 0.3;
    std::size_t n_estimators = 100;
    std::size_t max_depth = 6;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double reg_lambda = 1.0;
    double min_split_gain = 0.0;
    std::optional<double> base_score;  // defaults to mean(y)
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) {
            throw std::invalid_argument("boosting: learning_rate must be > 0");
        }
        if (!(subsample > 0.0 && subsample <= 1.0)) {
            throw std::invalid_argument("boosting: subsample must lie in (0, 1]");
        }
        if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0)) {
            throw std::invalid_argument("boosting: colsample_bytree must lie in (0, 1]");
        }
        if (!(reg_lambda >= 0.0) || !(min_split_gain >= 0.0)) {
            throw std::invalid_argument("boosting: reg_lambda and min_split_gain must be >= 0");
        }
    }
};

struct BoostedModel {
    double base_score = 0.0;
    double learning_rate = 1.0;
    std::vector<RegressionTree> trees;
    std::size_t n_features = 0;
    std::vector<double> train_loss;  // mean squared training loss after each round

    double predict_row(std::span<const double> x) const noexcept {
        double s = 0.0;
        for (const auto& t : trees) {
            s += t.predict_row(x);
        }
        return base_score + learning_rate * s;
    }

    friend bool operator==(const BoostedModel& a, const BoostedModel& b) {
        return a.base_score == b.base_score && a.learning_rate == b.learning_rate && a.trees == b.trees &&
               a.n_features == b.n_features;
    }
};

inline BoostedModel fit_gradient_boosting(const Matrix& x, std::span<const double> y, const BoostParams& params) {
    params.validate();
    if (x.rows() == 0 || y.size() != x.rows()) {
        throw std::invalid_argument("boosting: empty input or length mismatch");
    }
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    BoostedModel model;
    model.n_features = p;
    model.learning_rate = params.learning_rate;
    model.base_score = params.base_score.value_or(mean(y));

    std::vector<double> pred(n, model.base_score);
    std::vector<double> grad(n);
    const std::vector<double> hess(n, 1.0);
    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.reg_lambda = params.reg_lambda;
    tp.min_split_gain = params.min_split_gain;
    tp.criterion = SplitCriterion::second_order;
    const auto n_cols = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(params.colsample_bytree * static_cast<double>(p))));

    for (std::size_t round = 0; round < params.n_estimators; ++round) {
        Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(round)));
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = pred[i] - y[i];
        }
        std::vector<std::size_t> rows;
        if (params.subsample < 1.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.uniform() < params.subsample) {
                    rows.push_back(i);
                }
            }
            if (rows.empty()) {
                rows.push_back(rng.below(n));
            }
        }
        std::vector<std::size_t> cols;
        if (n_cols < p) {
            cols = rng.sample_without_replacement(p, n_cols);
            std::sort(cols.begin(), cols.end());
        }
        auto tree = fit_regression_tree(x, {}, tp, grad, hess, &rng, std::move(rows), cols);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += params.learning_rate * tree.predict_row(x.row(i));
            loss += (y[i] - pred[i]) * (y[i] - pred[i]);
        }
        model.train_loss.push_back(loss / static_cast<double>(n));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

template <typename Model>
std::vector<double> predict_ensemble(const Model& model, const Matrix& x) {
    if (x.rows() > 0 && x.cols() != model.n_features) {
        throw std::invalid_argument("predict_ensemble: expected " + std::to_string(model.n_features) +
                                    " columns, got " + std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out[r] = model.predict_row(x.row(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization: column arrays per tree
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const RegressionTree& t) {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;
    std::vector<double> cover;
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        cover.push_back(n.cover);
    }
    j = nlohmann::json{{"feature", feature}, {"threshold", threshold}, {"left", left},
                       {"right", right},     {"value", value},         {"cover", cover}};
}

inline void from_json(const nlohmann::json& j, RegressionTree& t) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto cover = j.at("cover").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n ||
        cover.size() != n) {
        throw std::invalid_argument("tree json: node arrays must be nonempty and of equal length");
    }
    t.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& node = t.nodes[i];
        node = {feature[i], threshold[i], left[i], right[i], value[i], cover[i]};
        if (!node.is_leaf()) {
            const auto bad = [n, i](int c) { return c <= static_cast<int>(i) || c >= static_cast<int>(n); };
            if (bad(node.left) || bad(node.right)) {
                throw std::invalid_argument("tree json: node " + std::to_string(i) + " has invalid children");
            }
        }
    }
}

inline void to_json(nlohmann::json& j, const ForestModel& m) {
    j = nlohmann::json{{"kind", "forest"}, {"n_features", m.n_features}, {"trees", m.trees}};
}

inline void from_json(const nlohmann::json& j, ForestModel& m) {
    m.n_features = j.at("n_features").get<std::size_t>();
    m.trees = j.at("trees").get<std::vector<RegressionTree>>();
}

inline void to_json(nlohmann::json& j, const BoostedModel& m) {
    j = nlohmann::json{{"kind", "boosted"},
                       {"n_features", m.n_features},
                       {"base_score", m.base_score},
                       {"learning_rate", m.learning_rate},
                       {"trees", m.trees}};
}

inline void from_json(const nlohmann::json& j, BoostedModel& m) {
    m.n_features = j.at("n_features").get<std::size_t>();
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.trees = j.at("trees").get<std::vector<RegressionTree>>();
}

}  // namespace mlcast
