#pragma once

#include "mlcast/common.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mlcast {

enum class KernelKind { linear, polynomial, rbf };

inline KernelKind parse_kernel(std::string_view s) {
    if (s == "linear") {
        return KernelKind::linear;
    }
    if (s == "polynomial" || s == "poly") {
        return KernelKind::polynomial;
    }
    if (s == "rbf") {
        return KernelKind::rbf;
    }
    throw std::invalid_argument("unknown kernel '" + std::string(s) + "'");
}

inline std::string_view kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::linear:
            return "linear";
        case KernelKind::polynomial:
            return "polynomial";
        case KernelKind::rbf:
            return "rbf";
    }
    return "linear";
}

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    int degree = 3;
    std::optional<double> gamma;  // unset: 1 / (p * var(X)) at fit time
    double coef0 = 0.0;

    double operator()(std::span<const double> a, std::span<const double> b) const noexcept {
        switch (kind) {
            case KernelKind::linear:
                return dot(a, b);
            case KernelKind::polynomial:
                return std::pow(gamma.value_or(1.0) * dot(a, b) + coef0, degree);
            case KernelKind::rbf: {
                double d2 = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    d2 += (a[i] - b[i]) * (a[i] - b[i]);
                }
                return std::exp(-gamma.value_or(1.0) * d2);
            }
        }
        return 0.0;
    }

private:
    static double dot(std::span<const double> a, std::span<const double> b) noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += a[i] * b[i];
        }
        return s;
    }
};

struct SvrModel {
    Matrix support;               // stored training rows
    std::vector<double> dual;     // alpha_i - alpha_i^*
    double bias = 0.0;
    KernelSpec kernel;
    double c = 1.0;
    double epsilon = 0.1;
    bool converged = true;
    std::size_t iterations = 0;
    std::vector<double> objective_trace;  // dual objective after each pair update

    std::size_t n_features() const noexcept { return support.cols(); }

    double predict_row(std::span<const double> x) const noexcept {
        double s = bias;
        for (std::size_t i = 0; i < dual.size(); ++i) {
            if (dual[i] != 0.0) {
                s += dual[i] * kernel(support.row(i), x);
            }
        }
        return s;
    }
};

// Dual objective (to be maximized) at dual coefficients beta with
// alpha = max(beta, 0), alpha^* = max(-beta, 0):
//   -1/2 beta' K beta - eps * sum|beta| + y' beta
inline double svr_dual_objective(const Matrix& x, std::span<const double> y, std::span<const double> beta,
                                 const KernelSpec& kernel, double epsilon) {
    double quad = 0.0;
    double lin = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        lin += y[i] * beta[i] - epsilon * std::abs(beta[i]);
        if (beta[i] == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < beta.size(); ++j) {
            quad += beta[i] * beta[j] * kernel(x.row(i), x.row(j));
        }
    }
    return lin - 0.5 * quad;
}

struct SvrOptions {
    double tolerance = 1e-3;
    std::size_t max_iterations = 100000;
    bool record_trace = false;
};

// epsilon-SVR via SMO on the 2n-variable dual
//   min 1/2 a' Q a + p' a,  sum s_t a_t = 0,  0 <= a_t <= C
// with a = (alpha, alpha^*), s = (+1, -1), p = (eps - y, eps + y), and
// Q_tu = s_t s_u K. The working pair is the maximal KKT violator.
inline SvrModel fit_svr(const Matrix& x, std::span<const double> y, double c, double epsilon, KernelSpec kernel,
                        const SvrOptions& opts = {}) {
    if (!(c > 0.0)) {
        throw std::invalid_argument("fit_svr: C must be > 0");
    }
    if (!(epsilon >= 0.0)) {
        throw std::invalid_argument("fit_svr: epsilon must be >= 0");
    }
    const std::size_t n = x.rows();
    if (n < 2 || y.size() != n) {
        throw std::invalid_argument("fit_svr: need at least 2 rows and matching targets");
    }
    if (kernel.degree < 1) {
        throw std::invalid_argument("fit_svr: degree must be >= 1");
    }
    if (!kernel.gamma) {
        const double v = variance(x.data());
        const auto p = static_cast<double>(x.cols());
        kernel.gamma = v > 0.0 ? 1.0 / (p * v) : 1.0;
    }
    if (!(*kernel.gamma > 0.0)) {
        throw std::invalid_argument("fit_svr: gamma must be > 0");
    }

    Matrix k(n, n);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            k(i, j) = kernel(x.row(i), x.row(j));
        }
    });

    const std::size_t m = 2 * n;
    auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
    auto base = [n](std::size_t t) { return t < n ? t : t - n; };
    auto q = [&](std::size_t t, std::size_t u) { return sign(t) * sign(u) * k(base(t), base(u)); };

    std::vector<double> a(m, 0.0);
    std::vector<double> grad(m);  // gradient of the minimization objective
    for (std::size_t t = 0; t < m; ++t) {
        grad[t] = t < n ? epsilon - y[t] : epsilon + y[t - n];
    }

    SvrModel model;
    model.kernel = kernel;
    model.c = c;
    model.epsilon = epsilon;
    model.converged = false;

    auto in_up = [&](std::size_t t) { return sign(t) > 0 ? a[t] < c : a[t] > 0.0; };
    auto in_low = [&](std::size_t t) { return sign(t) > 0 ? a[t] > 0.0 : a[t] < c; };
    auto minimization_value = [&] {
        double v = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            const double lin = t < n ? epsilon - y[t] : epsilon + y[t - n];
            v += 0.5 * a[t] * (grad[t] + lin);
        }
        return v;
    };

    std::size_t iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        // maximal violating pair: i maximizes -s G over I_up, j minimizes over I_low
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::size_t i = m;
        std::size_t j = m;
        for (std::size_t t = 0; t < m; ++t) {
            const double v = -sign(t) * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        if (i == m || j == m || g_max - g_min < opts.tolerance) {
            model.converged = true;
            break;
        }

        const double qii = q(i, i);
        const double qjj = q(j, j);
        const double qij = q(i, j);
        const double old_ai = a[i];
        const double old_aj = a[j];
        if (sign(i) != sign(j)) {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0) {
                quad = 1e-12;
            }
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0.0) {
                if (a[j] < 0.0) {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if (a[i] < 0.0) {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if (diff > 0.0) {
                if (a[i] > c) {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if (a[j] > c) {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0) {
                quad = 1e-12;
            }
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > c) {
                if (a[i] > c) {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if (a[j] < 0.0) {
                a[j] = 0.0;
                a[i] = sum;
            }
            if (sum > c) {
                if (a[j] > c) {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if (a[i] < 0.0) {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        const double dai = a[i] - old_ai;
        const double daj = a[j] - old_aj;
        for (std::size_t t = 0; t < m; ++t) {
            grad[t] += q(t, i) * dai + q(t, j) * daj;
        }
        if (opts.record_trace) {
            model.objective_trace.push_back(-minimization_value());
        }
    }
    model.iterations = iter;

    // bias from free variables, else midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = sign(t) * grad[t];
        if (a[t] >= c) {
            if (sign(t) < 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else if (a[t] <= 0.0) {
            if (sign(t) > 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else {
            ++n_free;
            free_sum += yg;
        }
    }
    const double r = n_free > 0 ? free_sum / static_cast<double>(n_free) : 0.5 * (ub + lb);
    model.bias = -r;

    model.dual.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        model.dual[t] = a[t] - a[t + n];
    }
    model.support = x;
    return model;
}

inline std::vector<double> predict_svr(const SvrModel& model, const Matrix& x) {
    if (x.rows() > 0 && x.cols() != model.n_features()) {
        throw std::invalid_argument("predict_svr: expected " + std::to_string(model.n_features()) +
                                    " columns, got " + std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out[r] = model.predict_row(x.row(r));
    }
    return out;
}

}  // namespace mlcast
