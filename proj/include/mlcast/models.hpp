#pragma once

#include "mlcast/arima.hpp"
#include "mlcast/common.hpp"
#include "mlcast/dataset.hpp"
#include "mlcast/linear_models.hpp"
#include "mlcast/svr.hpp"
#include "mlcast/tree_ensembles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mlcast {

enum class Family { arima, sarima, ols, ridge, lasso, elastic_net, random_forest, xgb, svr };

inline constexpr Family kAllFamilies[] = {Family::arima, Family::sarima,        Family::ols,
                                          Family::ridge, Family::lasso,         Family::elastic_net,
                                          Family::random_forest, Family::xgb,   Family::svr};

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::arima:
            return "arima";
        case Family::sarima:
            return "sarima";
        case Family::ols:
            return "ols";
        case Family::ridge:
            return "ridge";
        case Family::lasso:
            return "lasso";
        case Family::elastic_net:
            return "elastic_net";
        case Family::random_forest:
            return "random_forest";
        case Family::xgb:
            return "xgb";
        case Family::svr:
            return "svr";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    for (Family f : kAllFamilies) {
        if (family_name(f) == s) {
            return f;
        }
    }
    throw ConfigError("unknown model family '" + std::string(s) + "'");
}

inline bool is_univariate(Family f) { return f == Family::arima || f == Family::sarima; }
inline bool is_tree_family(Family f) { return f == Family::random_forest || f == Family::xgb; }
inline bool is_standardized_family(Family f) {
    return f == Family::ols || f == Family::ridge || f == Family::lasso || f == Family::elastic_net ||
           f == Family::svr;
}

using ParamValue = std::variant<double, std::string>;
using ParamSet = std::vector<std::pair<std::string, ParamValue>>;  // declaration order

inline std::string param_to_string(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) {
        return format_double(*d);
    }
    return std::get<std::string>(v);
}

namespace detail {

class ParamReader {
public:
    ParamReader(const ParamSet& params, Family family) : params_(params), family_(family) {
        used_.assign(params.size(), false);
    }

    double number(std::string_view name, double fallback) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].first == name) {
                used_[i] = true;
                const auto* d = std::get_if<double>(&params_[i].second);
                if (d == nullptr) {
                    throw std::invalid_argument(std::string(family_name(family_)) + ": parameter '" +
                                                std::string(name) + "' must be numeric");
                }
                return *d;
            }
        }
        return fallback;
    }

    std::optional<double> maybe_number(std::string_view name) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double v = number(name, nan);
        return std::isnan(v) ? std::nullopt : std::optional<double>(v);
    }

    std::size_t count(std::string_view name, std::size_t fallback) {
        const double v = number(name, static_cast<double>(fallback));
        if (!(v >= 0.0) || v != std::floor(v)) {
            throw std::invalid_argument(std::string(family_name(family_)) + ": parameter '" + std::string(name) +
                                        "' must be a nonnegative integer");
        }
        return static_cast<std::size_t>(v);
    }

    std::string text(std::string_view name, std::string fallback) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].first == name) {
                used_[i] = true;
                const auto* s = std::get_if<std::string>(&params_[i].second);
                if (s == nullptr) {
                    throw std::invalid_argument(std::string(family_name(family_)) + ": parameter '" +
                                                std::string(name) + "' must be a string");
                }
                return *s;
            }
        }
        return fallback;
    }

    void finish() const {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (!used_[i]) {
                throw std::invalid_argument(std::string(family_name(family_)) + ": unknown parameter '" +
                                            params_[i].first + "'");
            }
        }
    }

private:
    const ParamSet& params_;
    Family family_;
    std::vector<bool> used_;
};

}  // namespace detail

struct TrainedModel {
    Family family = Family::ols;
    std::variant<LinearModel, ForestModel, BoostedModel, SvrModel, ArimaFit> fit;
    Standardizer scaling;  // SVR input scaling (linear models carry their own)

    std::size_t n_features() const {
        return std::visit(
            [](const auto& m) -> std::size_t {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, LinearModel>) {
                    return m.n_features();
                } else if constexpr (std::is_same_v<M, SvrModel>) {
                    return m.n_features();
                } else if constexpr (std::is_same_v<M, ArimaFit>) {
                    return 0;
                } else {
                    return m.n_features;
                }
            },
            fit);
    }

    // Prediction for one raw feature row.
    double predict_row(std::span<const double> x) const {
        return std::visit(
            [&](const auto& m) -> double {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, ArimaFit>) {
                    throw std::invalid_argument("ARIMA models do not predict from feature rows");
                } else if constexpr (std::is_same_v<M, SvrModel>) {
                    if (scaling.empty()) {
                        return m.predict_row(x);
                    }
                    std::vector<double> z(x.size());
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        z[j] = (x[j] - scaling.mean[j]) / scaling.scale[j];
                    }
                    return m.predict_row(z);
                } else {
                    return m.predict_row(x);
                }
            },
            fit);
    }

    std::vector<double> predict(const Matrix& x) const {
        if (x.rows() > 0 && x.cols() != n_features()) {
            throw std::invalid_argument("predict: expected " + std::to_string(n_features()) + " columns, got " +
                                        std::to_string(x.cols()));
        }
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            out[r] = predict_row(x.row(r));
        }
        return out;
    }
};

// Fits a feature-based family on raw inputs. Linear and SVR families are
// standardized with statistics from `x`; tree families see raw values.
inline TrainedModel fit_model(Family family, const ParamSet& params, const Matrix& x, std::span<const double> y,
                              std::uint64_t seed) {
    if (is_univariate(family)) {
        throw std::invalid_argument(std::string(family_name(family)) + " is univariate; use select_order");
    }
    detail::ParamReader r(params, family);
    TrainedModel out;
    out.family = family;
    switch (family) {
        case Family::ols:
        case Family::ridge:
        case Family::lasso:
        case Family::elastic_net: {
            PenaltySpec pen;
            pen.lambda = family == Family::ols ? r.number("lambda", 0.0) : r.number("lambda", 0.001);
            pen.alpha = family == Family::ridge ? 0.0 : (family == Family::elastic_net ? r.number("alpha", 0.05) : 1.0);
            if (family == Family::ols && pen.lambda != 0.0) {
                throw std::invalid_argument("ols: lambda must be 0");
            }
            r.finish();
            const auto scaling = Standardizer::fit(x);
            auto model = fit_linear(scaling.apply(x), y, pen);
            model.scaling = scaling;
            out.fit = std::move(model);
            break;
        }
        case Family::random_forest: {
            ForestParams fp;
            fp.max_depth = r.count("max_depth", 9);
            fp.max_features = std::min(r.count("max_features", 4), x.cols());
            fp.n_estimators = r.count("n_estimators", 131);
            fp.min_samples_leaf = r.count("min_samples_leaf", 1);
            fp.seed = seed;
            r.finish();
            out.fit = fit_random_forest(x, y, fp);
            break;
        }
        case Family::xgb: {
            BoostParams bp;
            bp.learning_rate = r.number("learning_rate", 0.08);
            bp.n_estimators = r.count("n_estimators", 500);
            bp.max_depth = r.count("max_depth", 10);
            bp.subsample = r.number("subsample", 0.4);
            bp.colsample_bytree = r.number("colsample_bytree", 0.7);
            bp.reg_lambda = r.number("reg_lambda", 1.0);
            bp.min_split_gain = r.number("min_split_gain", 0.0);
            bp.base_score = r.maybe_number("base_score");
            bp.seed = seed;
            r.finish();
            out.fit = fit_gradient_boosting(x, y, bp);
            break;
        }
        case Family::svr: {
            const double c = r.number("C", 50.0);
            const double eps = r.number("epsilon", 0.065);
            KernelSpec k;
            k.kind = parse_kernel(r.text("kernel", "linear"));
            k.gamma = r.maybe_number("gamma");
            k.degree = static_cast<int>(r.count("degree", 3));
            k.coef0 = r.number("coef0", 0.0);
            r.finish();
            out.scaling = Standardizer::fit(x);
            out.fit = fit_svr(out.scaling.apply(x), y, c, eps, k);
            break;
        }
        case Family::arima:
        case Family::sarima:
            break;
    }
    return out;
}

}  // namespace mlcast
