#pragma once

#include "mlcast/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcast {

// ARIMA(p,d,q)(P,D,Q)_s
struct ArimaOrder {
    int p = 0;
    int d = 0;
    int q = 0;
    int P = 0;
    int D = 0;
    int Q = 0;
    int s = 1;

    void validate() const {
        if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0 || s < 1) {
            throw std::invalid_argument("arima order: negative term or season length < 1");
        }
        if ((P > 0 || D > 0 || Q > 0) && s <= 1) {
            throw std::invalid_argument("arima order: seasonal terms require s > 1");
        }
    }

    bool has_intercept() const noexcept { return d == 0 && D == 0; }

    // Estimated coefficients (intercept included).
    int n_params() const noexcept { return p + q + P + Q + (has_intercept() ? 1 : 0); }

    std::size_t min_length() const noexcept {
        return static_cast<std::size_t>(d + D * s + 3 * (p + q + s * (P + Q)) + 10);
    }

    std::string str() const {
        std::string out = "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
        if (P > 0 || D > 0 || Q > 0) {
            out += "(" + std::to_string(P) + "," + std::to_string(D) + "," + std::to_string(Q) + ")" +
                   std::to_string(s);
        }
        return out;
    }

    friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};

struct ArimaFit {
    ArimaOrder order;
    double intercept = 0.0;
    std::vector<double> ar;           // phi
    std::vector<double> ma;           // theta
    std::vector<double> seasonal_ar;  // Phi
    std::vector<double> seasonal_ma;  // Theta
    double sigma2 = 0.0;
    double css = 0.0;
    double aic = 0.0;
    std::size_t n_effective = 0;
    bool converged = false;
    bool stationary = true;
    bool invertible = true;
    std::vector<double> start_css;  // CSS at each multistart initial point
};

// Seasonal differences first, then ordinary ones.
inline std::vector<double> difference(std::span<const double> y, int d, int seasonal_d, int s) {
    if (d < 0 || seasonal_d < 0 || s < 1) {
        throw std::invalid_argument("difference: invalid orders");
    }
    const std::size_t lost = static_cast<std::size_t>(d + seasonal_d * s);
    if (y.size() <= lost) {
        throw std::invalid_argument("difference: series of length " + std::to_string(y.size()) +
                                    " too short for d=" + std::to_string(d) + ", D=" + std::to_string(seasonal_d) +
                                    ", s=" + std::to_string(s));
    }
    std::vector<double> w(y.begin(), y.end());
    auto lag_diff = [&w](std::size_t lag) {
        std::vector<double> out(w.size() - lag);
        for (std::size_t t = lag; t < w.size(); ++t) {
            out[t - lag] = w[t] - w[t - lag];
        }
        w = std::move(out);
    };
    for (int k = 0; k < seasonal_d; ++k) {
        lag_diff(static_cast<std::size_t>(s));
    }
    for (int k = 0; k < d; ++k) {
        lag_diff(1);
    }
    return w;
}

// Intermediate series of the differencing chain, used to undo it.
struct DifferencingChain {
    std::vector<std::size_t> lags;              // lag of each step, in application order
    std::vector<std::vector<double>> levels;    // levels[k] is the input to step k

    static DifferencingChain build(std::span<const double> y, int d, int seasonal_d, int s) {
        DifferencingChain chain;
        for (int k = 0; k < seasonal_d; ++k) {
            chain.lags.push_back(static_cast<std::size_t>(s));
        }
        for (int k = 0; k < d; ++k) {
            chain.lags.push_back(1);
        }
        std::vector<double> cur(y.begin(), y.end());
        for (std::size_t lag : chain.lags) {
            chain.levels.push_back(cur);
            std::vector<double> next(cur.size() - lag);
            for (std::size_t t = lag; t < cur.size(); ++t) {
                next[t - lag] = cur[t] - cur[t - lag];
            }
            cur = std::move(next);
        }
        chain.levels.push_back(std::move(cur));
        return chain;
    }

    // Undoes the differencing of `w` continuing past the stored series.
    std::vector<double> integrate_forecasts(std::vector<double> w) const {
        for (std::size_t k = lags.size(); k-- > 0;) {
            const auto& prev = levels[k];
            const std::size_t lag = lags[k];
            std::vector<double> ext(prev);
            for (double v : w) {
                ext.push_back(ext[ext.size() - lag] + v);
            }
            w.assign(ext.end() - static_cast<std::ptrdiff_t>(w.size()), ext.end());
        }
        return w;
    }

    // Rebuilds the original series from the fully differenced one and the
    // stored initial values of each step.
    std::vector<double> integrate_series(std::span<const double> w_in) const {
        std::vector<double> w(w_in.begin(), w_in.end());
        for (std::size_t k = lags.size(); k-- > 0;) {
            const std::size_t lag = lags[k];
            std::vector<double> out(levels[k].begin(), levels[k].begin() + static_cast<std::ptrdiff_t>(lag));
            for (double v : w) {
                out.push_back(out[out.size() - lag] + v);
            }
            w = std::move(out);
        }
        return w;
    }
};

namespace detail {

// Product of (1 - sum a_i B^i) and (1 - sum A_j B^{s j}) as lag coefficients
// c_k of  x_t = sum c_k x_{t-k}  (AR side). For the MA side the same
// expansion with + signs is obtained by negating inputs and output.
inline std::vector<double> expand_lag_polynomial(std::span<const double> nonseasonal, std::span<const double> seasonal,
                                                 int s) {
    const std::size_t len = nonseasonal.size() + static_cast<std::size_t>(s) * seasonal.size();
    std::vector<double> poly(len + 1, 0.0);  // coefficients of 1 - ...
    std::vector<double> a(nonseasonal.size() + 1, 0.0);
    a[0] = 1.0;
    for (std::size_t i = 0; i < nonseasonal.size(); ++i) {
        a[i + 1] = -nonseasonal[i];
    }
    std::vector<double> b(static_cast<std::size_t>(s) * seasonal.size() + 1, 0.0);
    b[0] = 1.0;
    for (std::size_t j = 0; j < seasonal.size(); ++j) {
        b[(j + 1) * static_cast<std::size_t>(s)] = -seasonal[j];
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            poly[i + j] += a[i] * b[j];
        }
    }
    std::vector<double> out(len);
    for (std::size_t k = 1; k <= len; ++k) {
        out[k - 1] = -poly[k];
    }
    return out;
}

struct ArmaCoefficients {
    double intercept = 0.0;
    std::vector<double> ar;  // expanded lag coefficients
    std::vector<double> ma;
};

inline ArmaCoefficients unpack(std::span<const double> theta, const ArimaOrder& o, ArimaFit* fit = nullptr) {
    std::size_t k = 0;
    auto take = [&](int count) {
        std::vector<double> v(theta.begin() + static_cast<std::ptrdiff_t>(k),
                              theta.begin() + static_cast<std::ptrdiff_t>(k + static_cast<std::size_t>(count)));
        k += static_cast<std::size_t>(count);
        return v;
    };
    ArmaCoefficients c;
    if (o.has_intercept()) {
        c.intercept = theta[k++];
    }
    const auto ar = take(o.p);
    const auto ma = take(o.q);
    const auto sar = take(o.P);
    const auto sma = take(o.Q);
    c.ar = expand_lag_polynomial(ar, sar, o.s);
    // MA polynomial (1 + sum theta B^i)(1 + sum Theta B^{sj})
    std::vector<double> neg_ma(ma.size());
    std::vector<double> neg_sma(sma.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        neg_ma[i] = -ma[i];
    }
    for (std::size_t i = 0; i < sma.size(); ++i) {
        neg_sma[i] = -sma[i];
    }
    c.ma = expand_lag_polynomial(neg_ma, neg_sma, o.s);
    for (double& v : c.ma) {
        v = -v;
    }
    if (fit != nullptr) {
        fit->intercept = c.intercept;
        fit->ar = ar;
        fit->ma = ma;
        fit->seasonal_ar = sar;
        fit->seasonal_ma = sma;
    }
    return c;
}

// Innovations e_t for t >= start with pre-sample innovations zero.
inline std::vector<double> css_residuals(std::span<const double> w, const ArmaCoefficients& c, std::size_t start) {
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t t = start; t < w.size(); ++t) {
        double pred = c.intercept;
        for (std::size_t i = 0; i < c.ar.size(); ++i) {
            pred += c.ar[i] * w[t - i - 1];
        }
        for (std::size_t j = 0; j < c.ma.size() && j < t; ++j) {
            pred += c.ma[j] * e[t - j - 1];
        }
        e[t] = w[t] - pred;
    }
    return e;
}

inline double css_value(std::span<const double> w, const ArmaCoefficients& c, std::size_t start) {
    const auto e = css_residuals(w, c, start);
    double s = 0.0;
    for (std::size_t t = start; t < w.size(); ++t) {
        s += e[t] * e[t];
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    bool converged = false;
};

// Nelder-Mead with standard coefficients.
inline SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                                 double step = 0.1, double ftol = 1e-10, std::size_t max_evals = 20000) {
    const std::size_t dim = x0.size();
    if (dim == 0) {
        return {x0, f(x0), true};
    }
    std::vector<std::vector<double>> simplex(dim + 1, x0);
    for (std::size_t i = 0; i < dim; ++i) {
        simplex[i + 1][i] += x0[i] != 0.0 ? step * std::max(1.0, std::abs(x0[i])) : step;
    }
    std::vector<double> values(dim + 1);
    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    for (std::size_t i = 0; i <= dim; ++i) {
        values[i] = eval(simplex[i]);
    }
    std::vector<std::size_t> order(dim + 1);
    bool converged = false;
    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[dim - 1];
        const double spread = std::abs(values[worst] - values[best]);
        if (std::isfinite(values[worst]) && spread <= ftol * (std::abs(values[best]) + 1e-20)) {
            converged = true;
            break;
        }
        std::vector<double> centroid(dim, 0.0);
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == worst) {
                continue;
            }
            for (std::size_t k = 0; k < dim; ++k) {
                centroid[k] += simplex[i][k] / static_cast<double>(dim);
            }
        }
        auto along = [&](double t) {
            std::vector<double> p(dim);
            for (std::size_t k = 0; k < dim; ++k) {
                p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            }
            return p;
        };
        auto reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            auto expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
            continue;
        }
        auto contracted = fr < values[worst] ? along(-0.5) : along(0.5);
        const double fc = eval(contracted);
        if (fc < std::min(fr, values[worst])) {
            simplex[worst] = std::move(contracted);
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == best) {
                continue;
            }
            for (std::size_t k = 0; k < dim; ++k) {
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            }
            values[i] = eval(simplex[i]);
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= dim; ++i) {
        if (values[i] < values[best]) {
            best = i;
        }
    }
    return {simplex[best], values[best], converged};
}

// All roots of 1 - sum c_k z^k outside the unit circle.
inline bool roots_outside_unit_circle(std::span<const double> lag_coefficients) {
    std::size_t len = lag_coefficients.size();
    while (len > 0 && lag_coefficients[len - 1] == 0.0) {
        --len;
    }
    if (len == 0) {
        return true;
    }
    // companion matrix eigenvalues are the inverse roots
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(len));
    for (std::size_t k = 0; k < len; ++k) {
        comp(0, static_cast<Eigen::Index>(k)) = lag_coefficients[k];
    }
    for (std::size_t k = 1; k < len; ++k) {
        comp(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = 1.0;
    }
    const Eigen::VectorXcd eig = comp.eigenvalues();
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
        if (std::abs(eig(i)) >= 1.0) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

struct CssOptions {
    std::uint64_t seed = 0;
    std::size_t n_perturbed_starts = 4;
    double perturbation_sd = 0.3;
};

// Conditional-sum-of-squares fit of an ARMA model to the differenced series.
inline ArimaFit fit_css(std::span<const double> y, const ArimaOrder& order, const CssOptions& opts = {}) {
    order.validate();
    if (y.size() < order.min_length()) {
        throw std::invalid_argument("fit_css: series of length " + std::to_string(y.size()) + " too short for order " +
                                    order.str() + " (need " + std::to_string(order.min_length()) + ")");
    }
    const auto w = difference(y, order.d, order.D, order.s);
    const std::size_t start = static_cast<std::size_t>(order.p + order.s * order.P);
    const auto k = static_cast<std::size_t>(order.n_params());
    auto objective = [&](std::span<const double> theta) { return detail::css_value(w, detail::unpack(theta, order), start); };

    ArimaFit fit;
    fit.order = order;
    Rng rng(opts.seed);
    std::vector<double> zero(k, 0.0);
    if (order.has_intercept()) {
        zero[0] = mean(std::span<const double>(w).subspan(start));
    }
    std::vector<std::vector<double>> starts{zero};
    for (std::size_t sidx = 0; sidx < opts.n_perturbed_starts; ++sidx) {
        auto x = zero;
        for (std::size_t i = order.has_intercept() ? 1 : 0; i < k; ++i) {
            x[i] += opts.perturbation_sd * rng.normal();
        }
        starts.push_back(std::move(x));
    }

    detail::SimplexResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (const auto& x0 : starts) {
        const double v0 = objective(x0);
        fit.start_css.push_back(v0);
        auto res = detail::nelder_mead(objective, x0, 0.1, 1e-10, 2000 * (k + 1));
        if (v0 < res.value) {  // never report worse than the start
            res.x = x0;
            res.value = v0;
        }
        if (std::isfinite(res.value)) {
            any_converged = true;
        }
        if (res.value < best.value) {
            best = std::move(res);
        }
    }
    if (best.x.empty()) {
        best.x = zero;
        best.value = objective(zero);
    }

    const auto coef = detail::unpack(best.x, order, &fit);
    fit.css = best.value;
    fit.n_effective = w.size() - start;
    fit.converged = any_converged && std::isfinite(best.value);
    const auto n_eff = static_cast<double>(fit.n_effective);
    fit.sigma2 = fit.css / n_eff;
    // floor keeps perfectly fitted (e.g. constant) series finite
    const double scaled = std::max(fit.css / n_eff, 1e-300);
    fit.aic = n_eff * std::log(scaled) + 2.0 * (static_cast<double>(k) + 1.0);
    fit.stationary = detail::roots_outside_unit_circle(coef.ar);
    std::vector<double> neg_ma(coef.ma.size());
    for (std::size_t i = 0; i < neg_ma.size(); ++i) {
        neg_ma[i] = -coef.ma[i];
    }
    fit.invertible = detail::roots_outside_unit_circle(neg_ma);
    return fit;
}

// Recursive h-step forecasts on the original scale; future innovations are 0.
inline std::vector<double> forecast(const ArimaFit& fit, std::span<const double> y, int h) {
    if (h <= 0) {
        throw std::invalid_argument("forecast: horizon must be >= 1");
    }
    const auto& order = fit.order;
    const auto chain = DifferencingChain::build(y, order.d, order.D, order.s);
    std::vector<double> w = chain.levels.back();
    std::vector<double> theta;
    if (order.has_intercept()) {
        theta.push_back(fit.intercept);
    }
    theta.insert(theta.end(), fit.ar.begin(), fit.ar.end());
    theta.insert(theta.end(), fit.ma.begin(), fit.ma.end());
    theta.insert(theta.end(), fit.seasonal_ar.begin(), fit.seasonal_ar.end());
    theta.insert(theta.end(), fit.seasonal_ma.begin(), fit.seasonal_ma.end());
    const auto c = detail::unpack(theta, order);
    const std::size_t start = static_cast<std::size_t>(order.p + order.s * order.P);
    auto e = detail::css_residuals(w, c, std::min(start, w.size()));
    std::vector<double> out;
    for (int step = 0; step < h; ++step) {
        const std::size_t t = w.size();
        double pred = c.intercept;
        for (std::size_t i = 0; i < c.ar.size(); ++i) {
            if (t >= i + 1) {
                pred += c.ar[i] * w[t - i - 1];
            }
        }
        for (std::size_t j = 0; j < c.ma.size(); ++j) {
            if (t >= j + 1) {
                pred += c.ma[j] * e[t - j - 1];
            }
        }
        w.push_back(pred);
        e.push_back(0.0);
        out.push_back(pred);
    }
    return chain.integrate_forecasts(std::move(out));
}

// p, q in 0..3, d in 0..1; with `seasonal`, (P, D, Q) in {0,1}^3 at season s.
inline std::vector<ArimaOrder> default_candidate_orders(bool seasonal, int s = 12) {
    std::vector<ArimaOrder> out;
    for (int d = 0; d <= 1; ++d) {
        for (int p = 0; p <= 3; ++p) {
            for (int q = 0; q <= 3; ++q) {
                if (!seasonal) {
                    out.push_back({p, d, q, 0, 0, 0, 1});
                    continue;
                }
                for (int sp = 0; sp <= 1; ++sp) {
                    for (int sd = 0; sd <= 1; ++sd) {
                        for (int sq = 0; sq <= 1; ++sq) {
                            out.push_back({p, d, q, sp, sd, sq, s});
                        }
                    }
                }
            }
        }
    }
    return out;
}

struct OrderSelection {
    ArimaOrder order;
    ArimaFit fit;
    std::vector<std::optional<ArimaFit>> candidates;  // nullopt: too short or failed
};

// Minimum-AIC converged candidate; ties go to fewer parameters, then list order.
inline OrderSelection select_order(std::span<const double> y, const std::vector<ArimaOrder>& candidates,
                                   std::uint64_t seed = 0) {
    if (candidates.empty()) {
        throw std::invalid_argument("select_order: empty candidate list");
    }
    std::vector<std::optional<ArimaFit>> fits(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        const auto& o = candidates[i];
        if (y.size() < o.min_length()) {
            return;
        }
        try {
            fits[i] = fit_css(y, o, {derive_seed(seed, static_cast<std::uint64_t>(i))});
        } catch (const std::invalid_argument&) {
        }
    });
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (!fits[i] || !fits[i]->converged || !std::isfinite(fits[i]->aic)) {
            continue;
        }
        if (!best) {
            best = i;
            continue;
        }
        const auto& a = *fits[i];
        const auto& b = *fits[*best];
        const double tol = 1e-9 * (1.0 + std::abs(b.aic));
        if (a.aic < b.aic - tol ||
            (std::abs(a.aic - b.aic) <= tol && a.order.n_params() < b.order.n_params())) {
            best = i;
        }
    }
    if (!best) {
        throw std::runtime_error("select_order: no candidate order converged");
    }
    return {candidates[*best], *fits[*best], std::move(fits)};
}

}  // namespace mlcast
