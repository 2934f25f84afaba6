#pragma once

#include "mlcast/common.hpp"
#include "mlcast/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcast {

// Penalty strength lambda and L1 mixing weight alpha (0 = ridge, 1 = lasso).
struct PenaltySpec {
    double lambda = 0.0;
    double alpha = 1.0;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw std::invalid_argument("penalty: lambda must be a finite value >= 0");
        }
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw std::invalid_argument("penalty: alpha must lie in [0, 1]");
        }
    }
};

struct LinearFitReport {
    std::size_t sweeps = 0;
    bool converged = true;
    bool jitter_used = false;             // singular normal equations at lambda = 0
    std::vector<double> objective_trace;  // penalized objective after each sweep
};

struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coefficients;
    PenaltySpec penalty;
    Standardizer scaling;  // applied to raw inputs before the linear map; empty = identity
    LinearFitReport report;

    std::size_t n_features() const noexcept { return coefficients.size(); }

    // Intercept and coefficients expressed on raw (unstandardized) inputs.
    std::pair<double, std::vector<double>> raw_coefficients() const {
        if (scaling.empty()) {
            return {intercept, coefficients};
        }
        double b = intercept;
        std::vector<double> beta(coefficients.size());
        for (std::size_t j = 0; j < beta.size(); ++j) {
            beta[j] = coefficients[j] / scaling.scale[j];
            b -= beta[j] * scaling.mean[j];
        }
        return {b, beta};
    }

    double predict_row(std::span<const double> x) const {
        double y = intercept;
        for (std::size_t j = 0; j < coefficients.size(); ++j) {
            const double z = scaling.empty() ? x[j] : (x[j] - scaling.mean[j]) / scaling.scale[j];
            y += coefficients[j] * z;
        }
        return y;
    }
};

// (1/(2n))||y - b - X beta||^2 + lambda (alpha ||beta||_1 + (1 - alpha)/2 ||beta||_2^2)
inline double penalized_objective(const Matrix& x, std::span<const double> y, double intercept,
                                  std::span<const double> beta, const PenaltySpec& penalty) {
    const auto n = static_cast<double>(x.rows());
    double rss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double r = y[i] - intercept;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            r -= x(i, j) * beta[j];
        }
        rss += r * r;
    }
    double l1 = 0.0;
    double l2 = 0.0;
    for (double b : beta) {
        l1 += std::abs(b);
        l2 += b * b;
    }
    return rss / (2.0 * n) + penalty.lambda * (penalty.alpha * l1 + 0.5 * (1.0 - penalty.alpha) * l2);
}

// Smallest lambda at which the lasso (alpha = 1) solution is all zeros.
inline double lambda_max(const Matrix& x, std::span<const double> y) {
    const double ybar = mean(y);
    double best = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            s += x(i, j) * (y[i] - ybar);
        }
        best = std::max(best, std::abs(s) / static_cast<double>(x.rows()));
    }
    return best;
}

inline double soft_threshold(double z, double gamma) noexcept {
    if (z > gamma) {
        return z - gamma;
    }
    if (z < -gamma) {
        return z + gamma;
    }
    return 0.0;
}

namespace detail {

inline LinearModel fit_normal_equations(const Matrix& x, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto p = static_cast<Eigen::Index>(x.cols());
    Eigen::MatrixXd xc(n, p);
    Eigen::VectorXd yc(n);
    const double ybar = mean(y);
    std::vector<double> xbar(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        xbar[j] = mean(x.column(j));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        yc(i) = y[static_cast<std::size_t>(i)] - ybar;
        for (Eigen::Index j = 0; j < p; ++j) {
            xc(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - xbar[static_cast<std::size_t>(j)];
        }
    }
    LinearModel model;
    model.penalty = {0.0, 1.0};
    const Eigen::MatrixXd gram = xc.transpose() * xc / static_cast<double>(n);
    const Eigen::VectorXd rhs = xc.transpose() * yc / static_cast<double>(n);
    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    qr.setThreshold(1e-10);
    if (p > 0 && qr.rank() < p) {
        model.report.jitter_used = true;
        const Eigen::MatrixXd jittered = gram + 1e-10 * Eigen::MatrixXd::Identity(p, p);
        beta = jittered.ldlt().solve(rhs);
    } else if (p > 0) {
        beta = qr.solve(yc);
    }
    model.coefficients.resize(x.cols());
    double b = ybar;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        model.coefficients[j] = beta(static_cast<Eigen::Index>(j));
        b -= model.coefficients[j] * xbar[j];
    }
    model.intercept = b;
    model.report.objective_trace.push_back(
        penalized_objective(x, y, model.intercept, model.coefficients, model.penalty));
    return model;
}

}  // namespace detail

struct CoordinateDescentOptions {
    double tolerance = 1e-8;
    std::size_t max_sweeps = 10000;
};

// Elastic-net family by cyclic coordinate descent; lambda = 0 goes through the
// normal equations. X is expected to be standardized by the caller.
inline LinearModel fit_linear(const Matrix& x, std::span<const double> y, const PenaltySpec& penalty,
                              const CoordinateDescentOptions& opts = {}) {
    penalty.validate();
    if (x.rows() != y.size()) {
        throw std::invalid_argument("fit_linear: row count mismatch");
    }
    if (x.rows() < 2) {
        throw std::invalid_argument("fit_linear: need at least 2 rows");
    }
    if (penalty.lambda == 0.0) {
        auto model = detail::fit_normal_equations(x, y);
        model.penalty = penalty;
        return model;
    }

    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const auto nd = static_cast<double>(n);
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            col_sq[j] += x(i, j) * x(i, j);
        }
        col_sq[j] /= nd;
    }
    const double l1 = penalty.lambda * penalty.alpha;
    const double l2 = penalty.lambda * (1.0 - penalty.alpha);

    LinearModel model;
    model.penalty = penalty;
    model.coefficients.assign(p, 0.0);
    model.intercept = mean(y);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        resid[i] = y[i] - model.intercept;
    }

    model.report.converged = false;
    for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double old = model.coefficients[j];
            double z = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                z += x(i, j) * resid[i];
            }
            z = z / nd + col_sq[j] * old;
            const double denom = col_sq[j] + l2;
            const double updated = denom > 0.0 ? soft_threshold(z, l1) / denom : 0.0;
            const double delta = updated - old;
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) {
                    resid[i] -= x(i, j) * delta;
                }
                model.coefficients[j] = updated;
            }
            max_delta = std::max(max_delta, std::abs(delta));
        }
        // unpenalized intercept: mean of partial residuals
        const double shift = mean(resid);
        if (shift != 0.0) {
            model.intercept += shift;
            for (double& r : resid) {
                r -= shift;
            }
        }
        max_delta = std::max(max_delta, std::abs(shift));
        model.report.sweeps = sweep + 1;
        model.report.objective_trace.push_back(
            penalized_objective(x, y, model.intercept, model.coefficients, penalty));
        if (max_delta < opts.tolerance) {
            model.report.converged = true;
            break;
        }
    }
    return model;
}

inline std::vector<double> predict_linear(const LinearModel& model, const Matrix& x) {
    if (x.cols() != model.n_features()) {
        throw std::invalid_argument("predict_linear: expected " + std::to_string(model.n_features()) +
                                    " columns, got " + std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out[r] = model.predict_row(x.row(r));
    }
    return out;
}

}  // namespace mlcast
