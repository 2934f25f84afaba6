#pragma once

#include "mlcast/common.hpp"
#include "mlcast/models.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mlcast {

// Ordered parameter name -> candidate values; the first parameter varies
// slowest when cells are enumerated.
struct ParamGrid {
    std::vector<std::pair<std::string, std::vector<ParamValue>>> axes;

    void validate() const {
        for (const auto& [name, values] : axes) {
            if (values.empty()) {
                throw std::invalid_argument("param grid: '" + name + "' has no values");
            }
        }
    }

    std::size_t n_cells() const {
        std::size_t n = 1;
        for (const auto& a : axes) {
            n *= a.second.size();
        }
        return n;
    }

    std::vector<ParamSet> cells() const {
        validate();
        std::vector<ParamSet> out;
        const std::size_t total = n_cells();
        out.reserve(total);
        for (std::size_t idx = 0; idx < total; ++idx) {
            ParamSet cell(axes.size());
            std::size_t rem = idx;
            for (std::size_t k = axes.size(); k-- > 0;) {
                const auto& values = axes[k].second;
                cell[k] = {axes[k].first, values[rem % values.size()]};
                rem /= values.size();
            }
            out.push_back(std::move(cell));
        }
        return out;
    }
};

// Geometric grid of `count` points from lo to hi inclusive.
inline std::vector<ParamValue> log_space(double lo, double hi, std::size_t count) {
    std::vector<ParamValue> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        out.emplace_back(lo * std::pow(hi / lo, t));
    }
    return out;
}

inline std::vector<ParamValue> values(std::initializer_list<double> v) {
    return {v.begin(), v.end()};
}

// Hyperparameter ranges per family. Single-parameter penalties get 10
// log-spaced points over the full range; multi-parameter families use short
// lists spanning each range.
inline ParamGrid default_grid(Family family) {
    switch (family) {
        case Family::ols:
            return {{{"lambda", values({0.0})}}};
        case Family::ridge:
        case Family::lasso:
            return {{{"lambda", log_space(0.001, 0.9, 10)}}};
        case Family::elastic_net:
            return {{{"lambda", log_space(0.001, 0.9, 10)}, {"alpha", log_space(0.05, 0.95, 5)}}};
        case Family::random_forest:
            return {{{"max_depth", values({2, 9, 50})},
                     {"max_features", values({2, 4, 20})},
                     {"n_estimators", values({10, 131})}}};
        case Family::xgb:
            return {{{"learning_rate", values({0.005, 0.08, 0.5})},
                     {"n_estimators", values({100, 500})},
                     {"max_depth", values({2, 4, 6, 8, 10})},
                     {"subsample", values({0.4, 0.9})},
                     {"colsample_bytree", values({0.7})}}};
        case Family::svr:
            return {{{"C", values({0.1, 1.0, 10.0, 50.0})},
                     {"epsilon", values({0.0005, 0.065, 1.0})},
                     {"kernel", {ParamValue{std::string("linear")}, ParamValue{std::string("polynomial")},
                                 ParamValue{std::string("rbf")}}}}};
        case Family::arima:
        case Family::sarima:
            break;
    }
    throw std::invalid_argument(std::string(family_name(family)) + " has no hyperparameter grid");
}

struct CvPlan {
    std::size_t k = 5;
    bool shuffle = false;
    std::uint64_t seed = 0;
};

// k disjoint folds covering 0..n-1; the first n % k folds get one extra
// index. Without shuffling each fold is a contiguous block in time order.
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, const CvPlan& plan) {
    if (plan.k < 2 || plan.k > n) {
        throw std::invalid_argument("kfold: k=" + std::to_string(plan.k) + " must lie in [2, " + std::to_string(n) + "]");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (plan.shuffle) {
        Rng rng(plan.seed);
        rng.shuffle(order);
    }
    std::vector<std::vector<std::size_t>> folds(plan.k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < plan.k; ++f) {
        const std::size_t size = n / plan.k + (f < n % plan.k ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(folds[f].begin(), folds[f].end());
        pos += size;
    }
    return folds;
}

struct CvRow {
    ParamSet params;
    std::vector<double> fold_mse;
    double mean_mse = 0.0;
    double sd_mse = 0.0;
    std::size_t rank = 0;
    std::string error;  // nonempty when a fit failed; mean_mse is then +inf
};

struct GridSearchResult {
    Family family = Family::ols;
    ParamSet best;
    double best_mean_mse = 0.0;
    std::vector<CvRow> table;  // grid declaration order
};

// Exhaustive search; best = lowest mean validation MSE, first cell on ties.
inline GridSearchResult grid_search(Family family, const ParamGrid& grid, const Matrix& x, std::span<const double> y,
                                    const CvPlan& plan, std::uint64_t seed = 0) {
    if (x.rows() != y.size()) {
        throw std::invalid_argument("grid_search: row count mismatch");
    }
    const auto folds = kfold_indices(x.rows(), plan);
    const auto cells = grid.cells();
    GridSearchResult out;
    out.family = family;
    out.table.resize(cells.size());

    parallel_for(cells.size(), [&](std::size_t c) {
        CvRow& row = out.table[c];
        row.params = cells[c];
        for (std::size_t f = 0; f < folds.size(); ++f) {
            std::vector<bool> held(x.rows(), false);
            for (std::size_t i : folds[f]) {
                held[i] = true;
            }
            std::vector<std::size_t> train_idx;
            for (std::size_t i = 0; i < x.rows(); ++i) {
                if (!held[i]) {
                    train_idx.push_back(i);
                }
            }
            const auto y_train = select(y, train_idx);
            const auto y_valid = select(y, folds[f]);
            double mse = std::numeric_limits<double>::infinity();
            try {
                const auto model = fit_model(family, cells[c], x.select_rows(train_idx), y_train,
                                             derive_seed(seed, static_cast<std::uint64_t>(f)));
                const auto pred = model.predict(x.select_rows(folds[f]));
                double s = 0.0;
                for (std::size_t i = 0; i < pred.size(); ++i) {
                    s += (pred[i] - y_valid[i]) * (pred[i] - y_valid[i]);
                }
                mse = s / static_cast<double>(pred.size());
                if (!std::isfinite(mse)) {
                    mse = std::numeric_limits<double>::infinity();
                }
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            row.fold_mse.push_back(mse);
        }
        if (!row.error.empty()) {
            row.mean_mse = std::numeric_limits<double>::infinity();
            row.sd_mse = std::numeric_limits<double>::infinity();
            return;
        }
        row.mean_mse = mean(row.fold_mse);
        double ss = 0.0;
        for (double v : row.fold_mse) {
            ss += (v - row.mean_mse) * (v - row.mean_mse);
        }
        row.sd_mse = row.fold_mse.size() > 1 ? std::sqrt(ss / static_cast<double>(row.fold_mse.size() - 1)) : 0.0;
        if (!std::isfinite(row.mean_mse)) {
            row.mean_mse = std::numeric_limits<double>::infinity();
        }
    });

    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.table[a].mean_mse < out.table[b].mean_mse; });
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.table[order[r]].rank = r + 1;
    }
    out.best = out.table[order.front()].params;
    out.best_mean_mse = out.table[order.front()].mean_mse;
    return out;
}

// `family,<param columns>,mean_mse,sd_mse,rank`
inline std::string cv_table_csv(const GridSearchResult& result) {
    std::string out = "family";
    if (!result.table.empty()) {
        for (const auto& [name, value] : result.table.front().params) {
            out += ',' + name;
        }
    }
    out += ",mean_mse,sd_mse,rank\n";
    for (const auto& row : result.table) {
        out += std::string(family_name(result.family));
        for (const auto& [name, value] : row.params) {
            out += ',' + param_to_string(value);
        }
        out += ',' + format_double(row.mean_mse) + ',' + format_double(row.sd_mse) + ',' + std::to_string(row.rank) +
               '\n';
    }
    return out;
}

}  // namespace mlcast
