#pragma once

// Reference computations used by the tests. Deliberately naive and
// independent of the library's solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

// Gauss-Jordan elimination with partial pivoting.
inline Vec solve(Mat a, Vec b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < n; ++r) {
            if (std::abs(a[r][k]) > std::abs(a[piv][k])) {
                piv = r;
            }
        }
        if (a[piv][k] == 0.0) {
            throw std::runtime_error("oracle::solve: singular");
        }
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == k) {
                continue;
            }
            const double f = a[r][k] / a[k][k];
            for (std::size_t c = k; c < n; ++c) {
                a[r][c] -= f * a[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        b[k] /= a[k][k];
    }
    return b;
}

// Least squares with an intercept column prepended; returns (b0, b1..bp).
inline Vec ols(const Mat& x, const Vec& y) {
    const std::size_t p = x.front().size() + 1;
    Mat a(p, Vec(p, 0.0));
    Vec rhs(p, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec z{1.0};
        z.insert(z.end(), x[i].begin(), x[i].end());
        for (std::size_t u = 0; u < p; ++u) {
            for (std::size_t v = 0; v < p; ++v) {
                a[u][v] += z[u] * z[v];
            }
            rhs[u] += z[u] * y[i];
        }
    }
    return solve(a, rhs);
}

// Shapley values by averaging marginal contributions over every feature
// ordering, with v(S) the mean of f over background rows with x's values
// substituted on S.
inline Vec shapley_by_permutations(const std::function<double(const Vec&)>& f, const Vec& x, const Mat& background) {
    const std::size_t p = x.size();
    auto value = [&](const std::vector<bool>& in) {
        double s = 0.0;
        for (const auto& b : background) {
            Vec z = b;
            for (std::size_t j = 0; j < p; ++j) {
                if (in[j]) {
                    z[j] = x[j];
                }
            }
            s += f(z);
        }
        return s / static_cast<double>(background.size());
    };
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vec phi(p, 0.0);
    double count = 0.0;
    do {
        std::vector<bool> in(p, false);
        double prev = value(in);
        for (std::size_t j : order) {
            in[j] = true;
            const double cur = value(in);
            phi[j] += cur - prev;
            prev = cur;
        }
        count += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& v : phi) {
        v /= count;
    }
    return phi;
}

// epsilon-SVR dual solved by accelerated projected gradient on
//   min 1/2 a'Qa + p'a  s.t.  0 <= a <= C, s'a = 0
// with a = (alpha, alpha*). Returns beta = alpha - alpha*.
inline Vec svr_dual_qp(const Mat& k, const Vec& y, double c, double eps, std::size_t iterations = 200000) {
    const std::size_t n = y.size();
    const std::size_t m = 2 * n;
    auto sgn = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
    auto kk = [&](std::size_t t, std::size_t u) { return sgn(t) * sgn(u) * k[t % n][u % n]; };
    Vec p(m);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = eps - y[i];
        p[i + n] = eps + y[i];
    }
    double lip = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        double row = 0.0;
        for (std::size_t u = 0; u < m; ++u) {
            row += std::abs(kk(t, u));
        }
        lip = std::max(lip, row);
    }
    const double step = 1.0 / std::max(lip, 1e-12);
    auto project = [&](const Vec& z) {
        auto clip_at = [&](double nu) {
            Vec a(m);
            for (std::size_t t = 0; t < m; ++t) {
                a[t] = std::clamp(z[t] - nu * sgn(t), 0.0, c);
            }
            return a;
        };
        auto balance = [&](const Vec& a) {
            double s = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                s += sgn(t) * a[t];
            }
            return s;
        };
        double lo = -1e6;
        double hi = 1e6;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (balance(clip_at(mid)) > 0.0 ? lo : hi) = mid;
        }
        return clip_at(0.5 * (lo + hi));
    };
    Vec a(m, 0.0);
    Vec v = a;
    double tk = 1.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        Vec g(m);
        for (std::size_t t = 0; t < m; ++t) {
            double s = p[t];
            for (std::size_t u = 0; u < m; ++u) {
                s += kk(t, u) * v[u];
            }
            g[t] = v[t] - step * s;
        }
        const Vec next = project(g);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        for (std::size_t t = 0; t < m; ++t) {
            v[t] = next[t] + (tk - 1.0) / tn * (next[t] - a[t]);
        }
        a = next;
        tk = tn;
    }
    Vec beta(n);
    for (std::size_t i = 0; i < n; ++i) {
        beta[i] = a[i] - a[i + n];
    }
    return beta;
}

}  // namespace oracle
