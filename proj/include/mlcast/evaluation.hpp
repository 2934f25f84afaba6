#pragma once

#include "mlcast/common.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcast {

namespace detail {

inline void check_pair(std::span<const double> actual, std::span<const double> pred, const char* what) {
    if (actual.empty() || actual.size() != pred.size()) {
        throw std::invalid_argument(std::string(what) + ": vectors must be nonempty and of equal length");
    }
}

}  // namespace detail

inline double mae(std::span<const double> actual, std::span<const double> pred) {
    detail::check_pair(actual, pred, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        s += std::abs(actual[i] - pred[i]);
    }
    return s / static_cast<double>(actual.size());
}

inline double rmse(std::span<const double> actual, std::span<const double> pred) {
    detail::check_pair(actual, pred, "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        s += (actual[i] - pred[i]) * (actual[i] - pred[i]);
    }
    return std::sqrt(s / static_cast<double>(actual.size()));
}

// Percentage of the benchmark RMSE removed by the model.
inline double rmse_reduction(double benchmark_rmse, double model_rmse) {
    if (!(benchmark_rmse > 0.0)) {
        throw std::invalid_argument("rmse_reduction: benchmark RMSE must be > 0");
    }
    return 100.0 * (benchmark_rmse - model_rmse) / benchmark_rmse;
}

struct DmResult {
    double statistic = 0.0;
    double pvalue = 1.0;
    std::size_t n = 0;
    std::size_t truncation_lag = 0;
    bool small_sample = false;
};

// Bartlett-weighted long-run variance of d with lags 0..max_lag.
inline double long_run_variance(std::span<const double> d, std::size_t max_lag) {
    const std::size_t n = d.size();
    const double dbar = mean(d);
    auto autocov = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = k; t < n; ++t) {
            s += (d[t] - dbar) * (d[t - k] - dbar);
        }
        return s / static_cast<double>(n);
    };
    double lrv = autocov(0);
    for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
        const double w = 1.0 - static_cast<double>(k) / static_cast<double>(max_lag + 1);
        lrv += 2.0 * w * autocov(k);
    }
    return lrv;
}

// Diebold-Mariano test on squared-error loss. A positive statistic means the
// candidate (errors_b) is more accurate than the benchmark (errors_a).
inline DmResult dm_test(std::span<const double> errors_a, std::span<const double> errors_b, std::size_t horizon = 1,
                        std::optional<bool> small_sample = std::nullopt) {
    if (errors_a.size() != errors_b.size()) {
        throw std::invalid_argument("dm_test: error vectors differ in length");
    }
    const std::size_t n = errors_a.size();
    if (n < 8) {
        throw std::invalid_argument("dm_test: need at least 8 forecast errors");
    }
    if (horizon < 1) {
        throw std::invalid_argument("dm_test: horizon must be >= 1");
    }
    DmResult out;
    out.n = n;
    out.truncation_lag = horizon - 1;
    out.small_sample = small_sample.value_or(n < 50);

    std::vector<double> d(n);
    bool all_zero = true;
    for (std::size_t t = 0; t < n; ++t) {
        d[t] = errors_a[t] * errors_a[t] - errors_b[t] * errors_b[t];
        all_zero = all_zero && d[t] == 0.0;
    }
    if (all_zero) {
        // identical losses: no evidence against equal accuracy
        out.statistic = 0.0;
        out.pvalue = 1.0;
        return out;
    }
    const double lrv = long_run_variance(d, out.truncation_lag);
    if (!(lrv > 0.0)) {
        throw std::domain_error("dm_test: nonpositive long-run variance of the loss differential");
    }
    const auto nd = static_cast<double>(n);
    const auto hd = static_cast<double>(horizon);
    double stat = mean(d) / std::sqrt(lrv / nd);
    if (out.small_sample) {
        const double factor = (nd + 1.0 - 2.0 * hd + hd * (hd - 1.0) / nd) / nd;
        stat *= std::sqrt(factor);
        const boost::math::students_t dist(nd - 1.0);
        out.pvalue = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(stat)));
    } else {
        const boost::math::normal dist;
        out.pvalue = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(stat)));
    }
    out.statistic = stat;
    out.pvalue = std::clamp(out.pvalue, 0.0, 1.0);
    return out;
}

struct MetricRow {
    std::string model;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> rmse_reduction_pct;  // absent on the benchmark row
    std::optional<DmResult> dm;
    bool failed = false;
};

// Benchmark row first; remaining rows compared against it.
inline std::vector<MetricRow> metric_table(std::span<const double> actual, const std::string& benchmark_id,
                                           std::span<const double> benchmark_pred,
                                           const std::vector<std::pair<std::string, std::vector<double>>>& candidates,
                                           std::size_t horizon = 1, std::optional<bool> small_sample = std::nullopt) {
    std::vector<MetricRow> rows;
    MetricRow bench{benchmark_id, mae(actual, benchmark_pred), rmse(actual, benchmark_pred), std::nullopt,
                    std::nullopt, false};
    std::vector<double> bench_err(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) {
        bench_err[i] = actual[i] - benchmark_pred[i];
    }
    rows.push_back(bench);
    for (const auto& [id, pred] : candidates) {
        MetricRow row{id, mae(actual, pred), rmse(actual, pred), std::nullopt, std::nullopt, false};
        if (bench.rmse > 0.0) {
            row.rmse_reduction_pct = rmse_reduction(bench.rmse, row.rmse);
        }
        std::vector<double> err(actual.size());
        for (std::size_t i = 0; i < actual.size(); ++i) {
            err[i] = actual[i] - pred[i];
        }
        try {
            row.dm = dm_test(bench_err, err, horizon, small_sample);
        } catch (const std::exception&) {
            row.dm.reset();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// `model,mae,rmse,rmse_reduction_pct,dm_stat,dm_pvalue`; blank cells where a
// value is undefined, NA on failed rows.
inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out = "model,mae,rmse,rmse_reduction_pct,dm_stat,dm_pvalue\n";
    for (const auto& r : rows) {
        out += r.model;
        if (r.failed) {
            out += ",NA,NA,NA,NA,NA\n";
            continue;
        }
        out += ',' + format_double(r.mae) + ',' + format_double(r.rmse) + ',';
        if (r.rmse_reduction_pct) {
            out += format_double(*r.rmse_reduction_pct);
        }
        out += ',';
        if (r.dm) {
            out += format_double(r.dm->statistic) + ',' + format_double(r.dm->pvalue);
        } else {
            out += ',';
        }
        out += '\n';
    }
    return out;
}

}  // namespace mlcast
