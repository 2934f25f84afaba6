#pragma once

#include "mlcast/common.hpp"
#include "mlcast/models.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcast {

// Interventional value function: v(S) averages f over the background with
// features in S taken from x and the rest from each background row.
//
// Both engines below compute Shapley values of this game. exact_shapley
// enumerates all 2^p coalitions and works for any predictor; tree_shap walks
// tree paths once per background row and must agree with it.

inline constexpr std::size_t kMaxExactFeatures = 15;

struct ShapMatrix {
    std::vector<std::string> feature_names;
    double base_value = 0.0;
    Matrix phi;                       // rows x features
    std::vector<double> predictions;  // f(x_r), for auditing efficiency

    std::size_t n_rows() const noexcept { return phi.rows(); }
    std::size_t n_features() const noexcept { return phi.cols(); }
};

namespace detail {

inline void check_background(const Matrix& background, std::size_t p) {
    if (background.rows() == 0) {
        throw std::invalid_argument("shapley: empty background set");
    }
    if (background.cols() != p) {
        throw std::invalid_argument("shapley: background has " + std::to_string(background.cols()) +
                                    " features, expected " + std::to_string(p));
    }
}

inline const std::vector<double>& factorials() {
    static const std::vector<double> table = [] {
        std::vector<double> f(171, 1.0);
        for (std::size_t i = 1; i < f.size(); ++i) {
            f[i] = f[i - 1] * static_cast<double>(i);
        }
        return f;
    }();
    return table;
}

}  // namespace detail

template <typename Predictor>
double background_mean(const Predictor& f, const Matrix& background) {
    double s = 0.0;
    for (std::size_t b = 0; b < background.rows(); ++b) {
        s += f(background.row(b));
    }
    return s / static_cast<double>(background.rows());
}

// Brute-force Shapley values over all coalitions.
template <typename Predictor>
std::vector<double> exact_shapley(const Predictor& f, std::span<const double> x, const Matrix& background) {
    const std::size_t p = x.size();
    if (p > kMaxExactFeatures) {
        throw std::invalid_argument("exact_shapley: " + std::to_string(p) + " features exceed the enumeration limit of " +
                                    std::to_string(kMaxExactFeatures));
    }
    detail::check_background(background, p);
    const std::size_t n_sets = std::size_t{1} << p;
    std::vector<double> value(n_sets);
    std::vector<double> z(p);
    for (std::size_t mask = 0; mask < n_sets; ++mask) {
        double s = 0.0;
        for (std::size_t b = 0; b < background.rows(); ++b) {
            const auto bg = background.row(b);
            for (std::size_t j = 0; j < p; ++j) {
                z[j] = (mask >> j) & 1U ? x[j] : bg[j];
            }
            s += f(std::span<const double>(z));
        }
        value[mask] = s / static_cast<double>(background.rows());
    }
    const auto& fact = detail::factorials();
    std::vector<double> phi(p, 0.0);
    for (std::size_t mask = 0; mask < n_sets; ++mask) {
        const auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
        if (size == p) {
            continue;
        }
        const double w = fact[size] * fact[p - size - 1] / fact[p];
        for (std::size_t i = 0; i < p; ++i) {
            if (!((mask >> i) & 1U)) {
                phi[i] += w * (value[mask | (std::size_t{1} << i)] - value[mask]);
            }
        }
    }
    return phi;
}

namespace detail {

struct TreeShapWalker {
    const RegressionTree& tree;
    std::span<const double> x;
    std::span<const double> bg;
    std::span<double> phi;
    std::vector<std::uint8_t> state;  // 0 unseen, 1 taken from x, 2 taken from background
    std::vector<std::size_t> from_x;
    std::vector<std::size_t> from_bg;

    void walk(std::size_t i) {
        const auto& node = tree.nodes[i];
        if (node.is_leaf()) {
            const std::size_t a = from_x.size();
            const std::size_t b = from_bg.size();
            if (a + b == 0) {
                return;
            }
            const auto& fact = factorials();
            if (a > 0) {
                const double w = fact[a - 1] * fact[b] / fact[a + b];
                for (std::size_t j : from_x) {
                    phi[j] += w * node.value;
                }
            }
            if (b > 0) {
                const double w = fact[a] * fact[b - 1] / fact[a + b];
                for (std::size_t j : from_bg) {
                    phi[j] -= w * node.value;
                }
            }
            return;
        }
        const auto f = static_cast<std::size_t>(node.feature);
        const auto x_child = static_cast<std::size_t>(x[f] <= node.threshold ? node.left : node.right);
        const auto bg_child = static_cast<std::size_t>(bg[f] <= node.threshold ? node.left : node.right);
        if (state[f] == 1) {
            walk(x_child);
        } else if (state[f] == 2) {
            walk(bg_child);
        } else if (x_child == bg_child) {
            walk(x_child);
        } else {
            state[f] = 1;
            from_x.push_back(f);
            walk(x_child);
            from_x.pop_back();
            state[f] = 2;
            from_bg.push_back(f);
            walk(bg_child);
            from_bg.pop_back();
            state[f] = 0;
        }
    }
};

}  // namespace detail

// Interventional path algorithm for one tree. Adds scale * phi into `phi`.
inline void tree_shap_accumulate(const RegressionTree& tree, std::span<const double> x, const Matrix& background,
                                 std::span<double> phi, double scale) {
    std::vector<double> local(x.size(), 0.0);
    detail::TreeShapWalker walker{tree, x, {}, local, std::vector<std::uint8_t>(x.size(), 0), {}, {}};
    for (std::size_t b = 0; b < background.rows(); ++b) {
        walker.bg = background.row(b);
        walker.walk(0);
    }
    const double w = scale / static_cast<double>(background.rows());
    for (std::size_t j = 0; j < x.size(); ++j) {
        phi[j] += w * local[j];
    }
}

inline std::vector<double> tree_shap(const RegressionTree& tree, std::span<const double> x, const Matrix& background) {
    detail::check_background(background, x.size());
    std::vector<double> phi(x.size(), 0.0);
    tree_shap_accumulate(tree, x, background, phi, 1.0);
    return phi;
}

// Forest: trees averaged.
inline std::vector<double> tree_shap(const ForestModel& model, std::span<const double> x, const Matrix& background) {
    detail::check_background(background, x.size());
    std::vector<double> phi(x.size(), 0.0);
    const double w = 1.0 / static_cast<double>(model.trees.size());
    for (const auto& t : model.trees) {
        tree_shap_accumulate(t, x, background, phi, w);
    }
    return phi;
}

// Boosting: trees scaled by the learning rate; base_score lands in the base value.
inline std::vector<double> tree_shap(const BoostedModel& model, std::span<const double> x, const Matrix& background) {
    detail::check_background(background, x.size());
    std::vector<double> phi(x.size(), 0.0);
    for (const auto& t : model.trees) {
        tree_shap_accumulate(t, x, background, phi, model.learning_rate);
    }
    return phi;
}

// Closed form for models linear in raw inputs: beta_j (x_j - mean_b x_j).
inline std::vector<double> linear_shap(std::span<const double> raw_coefficients, std::span<const double> x,
                                       const Matrix& background) {
    detail::check_background(background, x.size());
    std::vector<double> phi(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        phi[j] = raw_coefficients[j] * (x[j] - mean(background.column(j)));
    }
    return phi;
}

namespace detail {

// Weight vector of a linear-kernel SVR on raw inputs.
inline std::pair<std::vector<double>, bool> svr_linear_weights(const TrainedModel& model) {
    const auto* svr = std::get_if<SvrModel>(&model.fit);
    if (svr == nullptr || svr->kernel.kind != KernelKind::linear) {
        return {{}, false};
    }
    std::vector<double> w(svr->n_features(), 0.0);
    for (std::size_t i = 0; i < svr->dual.size(); ++i) {
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] += svr->dual[i] * svr->support(i, j);
        }
    }
    if (!model.scaling.empty()) {
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] /= model.scaling.scale[j];
        }
    }
    return {w, true};
}

}  // namespace detail

// Shapley attributions for every row. Tree families use tree_shap, linear
// models (and linear-kernel SVR) the closed form, everything else exact
// enumeration.
inline ShapMatrix explain_matrix(const TrainedModel& model, const Matrix& rows, const Matrix& background,
                                 std::vector<std::string> feature_names = {}) {
    if (std::holds_alternative<ArimaFit>(model.fit)) {
        throw std::invalid_argument("explain: ARIMA benchmark models have no features to attribute");
    }
    if (rows.rows() == 0) {
        throw std::invalid_argument("explain: no rows to explain");
    }
    const std::size_t p = model.n_features();
    if (rows.cols() != p) {
        throw std::invalid_argument("explain: rows have " + std::to_string(rows.cols()) + " features, model expects " +
                                    std::to_string(p));
    }
    detail::check_background(background, p);
    if (feature_names.empty()) {
        for (std::size_t j = 0; j < p; ++j) {
            feature_names.push_back("x" + std::to_string(j));
        }
    }
    if (feature_names.size() != p) {
        throw std::invalid_argument("explain: feature name count mismatch");
    }

    ShapMatrix out;
    out.feature_names = std::move(feature_names);
    out.phi = Matrix(rows.rows(), p);
    out.predictions.resize(rows.rows());
    const auto predictor = [&model](std::span<const double> z) { return model.predict_row(z); };
    out.base_value = background_mean(predictor, background);

    std::vector<double> linear_coef;
    bool closed_form = false;
    if (const auto* lin = std::get_if<LinearModel>(&model.fit)) {
        linear_coef = lin->raw_coefficients().second;
        closed_form = true;
    } else if (auto [w, ok] = detail::svr_linear_weights(model); ok) {
        linear_coef = std::move(w);
        closed_form = true;
    }
    if (!closed_form && !is_tree_family(model.family) && p > kMaxExactFeatures) {
        throw std::invalid_argument("explain: " + std::string(family_name(model.family)) + " with " +
                                    std::to_string(p) + " features exceeds the exact enumeration limit of " +
                                    std::to_string(kMaxExactFeatures));
    }

    parallel_for(rows.rows(), [&](std::size_t r) {
        const auto x = rows.row(r);
        std::vector<double> phi;
        if (closed_form) {
            phi = linear_shap(linear_coef, x, background);
        } else if (const auto* forest = std::get_if<ForestModel>(&model.fit)) {
            phi = tree_shap(*forest, x, background);
        } else if (const auto* boosted = std::get_if<BoostedModel>(&model.fit)) {
            phi = tree_shap(*boosted, x, background);
        } else {
            phi = exact_shapley(predictor, x, background);
        }
        std::copy(phi.begin(), phi.end(), out.phi.row(r).begin());
        out.predictions[r] = model.predict_row(x);
    });
    return out;
}

struct FeatureImportance {
    std::string feature;
    double mean_abs_shap = 0.0;
};

// Mean |phi| per feature, descending; ties keep declaration order.
inline std::vector<FeatureImportance> global_importance(const ShapMatrix& m) {
    if (m.n_rows() == 0) {
        throw std::invalid_argument("global_importance: empty matrix");
    }
    std::vector<FeatureImportance> out;
    for (std::size_t j = 0; j < m.n_features(); ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            s += std::abs(m.phi(r, j));
        }
        out.push_back({m.feature_names[j], s / static_cast<double>(m.n_rows())});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.mean_abs_shap > b.mean_abs_shap; });
    return out;
}

// Background rows: all of `x` when it fits under `cap`, otherwise a seeded
// uniform subsample kept in time order.
inline Matrix make_background(const Matrix& x, std::size_t cap, std::uint64_t seed) {
    if (x.rows() <= cap) {
        return x;
    }
    Rng rng(seed);
    auto idx = rng.sample_without_replacement(x.rows(), cap);
    std::sort(idx.begin(), idx.end());
    return x.select_rows(idx);
}

}  // namespace mlcast
