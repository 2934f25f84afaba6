#pragma once

#include "mlcast/common.hpp"
#include "mlcast/shapley.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcast {

struct DependencePoint {
    double x_value = 0.0;
    double shap_value = 0.0;
    std::optional<double> color_value;
    std::size_t row_index = 0;

    friend bool operator==(const DependencePoint&, const DependencePoint&) = default;
};

struct ColorBy {
    enum class Mode { none, automatic, explicit_feature } mode = Mode::none;
    std::string feature;

    static ColorBy none() { return {}; }
    static ColorBy automatic() { return {Mode::automatic, {}}; }
    static ColorBy by(std::string name) { return {Mode::explicit_feature, std::move(name)}; }
};

struct DependenceData {
    std::string feature;
    std::optional<std::string> color_feature;
    std::vector<DependencePoint> points;
};

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        return 0.0;
    }
    return sab / std::sqrt(saa * sbb);
}

namespace detail {

inline std::size_t feature_index(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw std::invalid_argument("unknown feature '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
}

// Least-squares polynomial coefficients (ascending) and residual sum of squares.
inline std::pair<std::vector<double>, double> least_squares_poly(std::span<const double> x, std::span<const double> y,
                                                                 int degree) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = 1.0;
        for (int k = 0; k <= degree; ++k) {
            a(i, k) = v;
            v *= x[static_cast<std::size_t>(i)];
        }
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd resid = b - a * c;
    return {std::vector<double>(c.data(), c.data() + c.size()), resid.squaredNorm()};
}

}  // namespace detail

// One point per explained row. Automatic coloring picks the feature whose raw
// values correlate most (in absolute value) with the residuals of a straight
// line through (x, shap).
inline DependenceData dependence_data(const ShapMatrix& m, const Matrix& x, const std::string& feature,
                                      const ColorBy& color_by = ColorBy::none()) {
    if (x.rows() != m.n_rows() || x.cols() != m.n_features()) {
        throw std::invalid_argument("dependence_data: matrix shapes differ");
    }
    const std::size_t j = detail::feature_index(m.feature_names, feature);
    DependenceData out;
    out.feature = feature;
    const auto xs = x.column(j);
    std::vector<double> shap(m.n_rows());
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        shap[r] = m.phi(r, j);
    }

    std::optional<std::size_t> color;
    if (color_by.mode == ColorBy::Mode::explicit_feature) {
        color = detail::feature_index(m.feature_names, color_by.feature);
    } else if (color_by.mode == ColorBy::Mode::automatic && m.n_features() > 1) {
        std::vector<double> resid = shap;
        if (variance(xs) > 0.0 && xs.size() >= 2) {
            const auto [coef, rss] = detail::least_squares_poly(xs, shap, 1);
            for (std::size_t r = 0; r < resid.size(); ++r) {
                resid[r] = shap[r] - (coef[0] + coef[1] * xs[r]);
            }
        }
        double best = -1.0;
        for (std::size_t k = 0; k < m.n_features(); ++k) {
            if (k == j) {
                continue;
            }
            const double c = std::abs(pearson(x.column(k), resid));
            if (c > best) {
                best = c;
                color = k;
            }
        }
    }
    if (color) {
        out.color_feature = m.feature_names[*color];
    }
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        DependencePoint pt{xs[r], shap[r], std::nullopt, r};
        if (color) {
            pt.color_value = x(r, *color);
        }
        out.points.push_back(pt);
    }
    return out;
}

// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

enum class TrimAxis { feature, shap };

struct OutlierRule {
    double k = 1.5;
    TrimAxis axis = TrimAxis::feature;
};

struct FilterResult {
    std::vector<DependencePoint> points;
    std::size_t removed = 0;
    bool guard_triggered = false;  // trimming would leave fewer than 4 points
};

// Tukey fences [Q1 - k IQR, Q3 + k IQR], re-applied until nothing falls
// outside, so the result is a fixed point of the rule.
inline FilterResult filter_outliers(const std::vector<DependencePoint>& points, const OutlierRule& rule = {}) {
    if (points.empty()) {
        throw std::invalid_argument("filter_outliers: no points");
    }
    constexpr std::size_t kMinSurvivors = 4;
    auto value = [&rule](const DependencePoint& p) { return rule.axis == TrimAxis::feature ? p.x_value : p.shap_value; };
    std::vector<DependencePoint> cur = points;
    while (true) {
        std::vector<double> v;
        v.reserve(cur.size());
        for (const auto& p : cur) {
            v.push_back(value(p));
        }
        const double q1 = quantile(v, 0.25);
        const double q3 = quantile(v, 0.75);
        const double iqr = q3 - q1;
        std::vector<DependencePoint> kept;
        for (const auto& p : cur) {
            const double z = value(p);
            if (z >= q1 - rule.k * iqr && z <= q3 + rule.k * iqr) {
                kept.push_back(p);
            }
        }
        if (kept.size() == cur.size()) {
            break;
        }
        if (kept.size() < kMinSurvivors) {
            return {points, 0, true};
        }
        cur = std::move(kept);
    }
    const std::size_t removed = points.size() - cur.size();
    return {std::move(cur), removed, false};
}

struct PolyFit {
    int degree = 1;
    std::vector<double> coefficients;  // ascending powers
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n_points = 0;

    double operator()(double x) const noexcept {
        double y = 0.0;
        for (std::size_t k = coefficients.size(); k-- > 0;) {
            y = y * x + coefficients[k];
        }
        return y;
    }
};

inline PolyFit fit_polynomial(std::span<const double> x, std::span<const double> y, int degree) {
    const auto n = x.size();
    const auto [coef, rss] = detail::least_squares_poly(x, y, degree);
    const double ybar = mean(y);
    double tss = 0.0;
    for (double v : y) {
        tss += (v - ybar) * (v - ybar);
    }
    PolyFit fit;
    fit.degree = degree;
    fit.coefficients = coef;
    fit.n_points = n;
    // a constant response is fitted perfectly by every degree
    fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    const double dof = static_cast<double>(n) - static_cast<double>(degree) - 1.0;
    fit.adj_r2 = 1.0 - (1.0 - fit.r2) * (static_cast<double>(n) - 1.0) / dof;
    return fit;
}

// Degree 1 and 2 least-squares fits; the higher adjusted R^2 wins, ties
// (within 1e-9) go to degree 1.
inline PolyFit fit_functional_form(const std::vector<DependencePoint>& points) {
    if (points.size() < 4) {
        throw std::invalid_argument("fit_functional_form: need at least 4 points");
    }
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& p : points) {
        x.push_back(p.x_value);
        y.push_back(p.shap_value);
    }
    if (variance(x) <= 0.0) {
        throw std::invalid_argument("fit_functional_form: all feature values are equal");
    }
    const auto linear = fit_polynomial(x, y, 1);
    const auto quadratic = fit_polynomial(x, y, 2);
    return quadratic.adj_r2 > linear.adj_r2 + 1e-9 ? quadratic : linear;
}

struct CrossingReport {
    std::vector<double> roots;  // ascending, inside the range
};

// Real roots of the fitted polynomial within [lo, hi].
inline CrossingReport zero_crossings(const PolyFit& fit, double lo, double hi) {
    std::vector<double> roots;
    const double c0 = fit.coefficients.size() > 0 ? fit.coefficients[0] : 0.0;
    const double c1 = fit.coefficients.size() > 1 ? fit.coefficients[1] : 0.0;
    const double c2 = fit.coefficients.size() > 2 ? fit.coefficients[2] : 0.0;
    if (c2 != 0.0) {
        const double disc = c1 * c1 - 4.0 * c2 * c0;
        if (disc == 0.0) {
            roots.push_back(-c1 / (2.0 * c2));
        } else if (disc > 0.0) {
            const double sq = std::sqrt(disc);
            const double qv = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
            roots.push_back(qv / c2);
            if (qv != 0.0) {
                roots.push_back(c0 / qv);
            } else {
                roots.push_back(0.0);
            }
        }
    } else if (c1 != 0.0) {
        roots.push_back(-c0 / c1);
    }
    CrossingReport out;
    for (double r : roots) {
        if (std::isfinite(r) && r >= lo && r <= hi) {
            out.roots.push_back(r);
        }
    }
    std::sort(out.roots.begin(), out.roots.end());
    out.roots.erase(std::unique(out.roots.begin(), out.roots.end()), out.roots.end());
    return out;
}

struct SummaryRecord {
    std::string feature;
    std::size_t row_index = 0;
    double shap_value = 0.0;
    double normalized_value = 0.5;  // per-feature min-max of the raw value
};

// Features in global-importance order, rows in input order.
inline std::vector<SummaryRecord> summary_plot_data(const ShapMatrix& m, const Matrix& x) {
    if (x.rows() != m.n_rows() || x.cols() != m.n_features()) {
        throw std::invalid_argument("summary_plot_data: matrix shapes differ");
    }
    std::vector<SummaryRecord> out;
    out.reserve(m.n_rows() * m.n_features());
    for (const auto& imp : global_importance(m)) {
        const std::size_t j = detail::feature_index(m.feature_names, imp.feature);
        const auto col = x.column(j);
        const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
        const double lo = *lo_it;
        const double span = *hi_it - lo;
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            const double norm = span > 0.0 ? (col[r] - lo) / span : 0.5;
            out.push_back({imp.feature, r, m.phi(r, j), norm});
        }
    }
    return out;
}

// Functional-form summary for one feature, as written to functional_form.json.
struct FunctionalForm {
    std::string feature;
    PolyFit fit;
    CrossingReport crossings;
    std::size_t outliers_removed = 0;
    bool outlier_guard = false;
};

inline FunctionalForm analyze_feature(const ShapMatrix& m, const Matrix& x, const std::string& feature,
                                      const OutlierRule& rule = {}) {
    const auto dep = dependence_data(m, x, feature);
    const auto filtered = filter_outliers(dep.points, rule);
    FunctionalForm ff;
    ff.feature = feature;
    ff.fit = fit_functional_form(filtered.points);
    double lo = filtered.points.front().x_value;
    double hi = lo;
    for (const auto& p : filtered.points) {
        lo = std::min(lo, p.x_value);
        hi = std::max(hi, p.x_value);
    }
    ff.crossings = zero_crossings(ff.fit, lo, hi);
    ff.outliers_removed = filtered.removed;
    ff.outlier_guard = filtered.guard_triggered;
    return ff;
}

inline nlohmann::json to_json(const FunctionalForm& ff) {
    nlohmann::json j;
    j["degree"] = ff.fit.degree;
    j["coefficients"] = ff.fit.coefficients;
    j["r2"] = ff.fit.r2;
    j["adj_r2"] = ff.fit.adj_r2;
    j["crossings"] = ff.crossings.roots;
    j["n_points"] = ff.fit.n_points;
    j["outliers_removed"] = ff.outliers_removed;
    return j;
}

}  // namespace mlcast
