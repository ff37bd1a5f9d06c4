#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "cgp/model.hpp"
#include "cgp/types.hpp"

namespace cgp {

struct SolverOptions {
    double lambda1 = 0.0;
    double lambda1_c = 0.05;
    double lambda2_c = 1e3;
    int max_iterations = 50;
    double epsilon = 0.1;
    // Gram ridge for i > 1 lags; unset means escalate automatically when the
    // Gram matrix turns out singular.
    std::optional<double> ridge_lambda2;
};

enum class StopReason { max_iter, param_delta, mse_delta, mse_increase };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::max_iter: return "max_iter";
        case StopReason::param_delta: return "param_delta";
        case StopReason::mse_delta: return "mse_delta";
        case StopReason::mse_increase: return "mse_increase";
    }
    return "unknown";
}

inline double soft_threshold(double a, double b) {
    const double m = std::abs(a) - b;
    return m > 0.0 ? (a > 0.0 ? m : -m) : 0.0;
}

inline Vector soft_threshold(const Vector& a, double b) {
    return a.unaryExpr([b](double v) { return soft_threshold(v, b); });
}

// Precomputed sums over the fitting window k = M..K-1:
//   gram[i-1]       G_i    = sum x(k-i) x(k-i)^T
//   cross[i-1]      B_i    = sum x(k)   x(k-i)^T
//   lag_cross[l][i] H_l,i  = sum x(k-l) x(k-i)^T   (1-based l, i)
// plus the regularized inverses used by the i > 1 matrix updates and the
// scalar denominators d_j for the column updates of R_1.
struct GramCache {
    int n_lags = 0;
    Eigen::Index k_samples = 0;
    Eigen::Index n_nodes = 0;
    std::vector<Matrix> gram;
    std::vector<Matrix> cross;
    std::vector<std::vector<Matrix>> lag_cross;  // lag_cross[l-1][i-1]
    std::vector<Matrix> inv;                     // inv[i-2] for i = 2..M
    std::vector<double> ridge;                   // ridge[i-2], chosen lambda2
    Vector d;
    std::vector<bool> dead;
    double energy = 0.0;  // sum_k ||x(k)||^2

    Eigen::Index window() const { return k_samples - n_lags; }
    const Matrix& h(int l, int i) const {
        return lag_cross[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(i - 1)];
    }
};

namespace detail {

// Smallest escalated ridge (starting from 1e-10 * trace/N, x10 steps) whose
// regularized inverse passes the accuracy check.
inline std::pair<Matrix, double> regularized_inverse(const Matrix& g, std::optional<double> fixed) {
    const Eigen::Index n = g.rows();
    auto attempt = [&](double lambda2) -> std::optional<Matrix> {
        Matrix reg = g;
        reg.diagonal().array() += 2.0 * lambda2;
        Eigen::LDLT<Matrix> ldlt(reg);
        if (ldlt.info() != Eigen::Success) return std::nullopt;
        Matrix inv = ldlt.solve(Matrix::Identity(n, n));
        const double resid = (reg * inv - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
        if (!(resid <= 1e-8)) return std::nullopt;
        return inv;
    };
    if (fixed) {
        auto inv = attempt(*fixed);
        if (!inv)
            throw DataError("Gram matrix singular at the requested ridge value");
        return {std::move(*inv), *fixed};
    }
    if (auto inv = attempt(0.0)) return {std::move(*inv), 0.0};
    double lambda2 = 1e-10 * g.trace() / static_cast<double>(n);
    if (!(lambda2 > 0.0)) lambda2 = 1e-10;
    for (int step = 0; step < 40; ++step, lambda2 *= 10.0) {
        if (auto inv = attempt(lambda2)) return {std::move(*inv), lambda2};
    }
    throw DataError("ridge escalation failed to regularize the Gram matrix");
}

}  // namespace detail

inline GramCache build_gram_cache(const TimeSeries& x, int n_lags,
                                  std::optional<double> ridge_lambda2 = std::nullopt) {
    const Eigen::Index k = x.n_samples();
    const Eigen::Index n = x.n_nodes();
    if (k <= n_lags)
        throw DataError("insufficient data: need more samples than lags");

    GramCache cache;
    cache.n_lags = n_lags;
    cache.k_samples = k;
    cache.n_nodes = n;
    const Eigen::Index t = k - n_lags;

    const auto lagged = [&](int l) { return x.values.middleCols(n_lags - l, t); };
    const Matrix target = x.values.middleCols(n_lags, t);
    cache.energy = target.squaredNorm();

    cache.gram.reserve(static_cast<std::size_t>(n_lags));
    cache.cross.reserve(static_cast<std::size_t>(n_lags));
    cache.lag_cross.resize(static_cast<std::size_t>(n_lags));
    for (int i = 1; i <= n_lags; ++i) {
        cache.gram.push_back(lagged(i) * lagged(i).transpose());
        cache.cross.push_back(target * lagged(i).transpose());
        auto& row = cache.lag_cross[static_cast<std::size_t>(i - 1)];
        row.resize(static_cast<std::size_t>(n_lags));
    }
    for (int l = 1; l <= n_lags; ++l)
        for (int i = 1; i <= n_lags; ++i) {
            if (l == i)
                cache.lag_cross[l - 1][i - 1] = cache.gram[static_cast<std::size_t>(i - 1)];
            else if (i < l)
                cache.lag_cross[l - 1][i - 1] = cache.lag_cross[i - 1][l - 1].transpose();
            else
                cache.lag_cross[l - 1][i - 1] = lagged(l) * lagged(i).transpose();
        }

    cache.d = cache.gram.front().diagonal();
    cache.dead.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) cache.dead[static_cast<std::size_t>(j)] = cache.d[j] <= 0.0;

    for (int i = 2; i <= n_lags; ++i) {
        auto [inv, lambda2] = detail::regularized_inverse(cache.gram[static_cast<std::size_t>(i - 1)], ridge_lambda2);
        cache.inv.push_back(std::move(inv));
        cache.ridge.push_back(lambda2);
    }
    return cache;
}

// Exact minimizer of the quadratic loss over R_i (i > 1) holding the other
// lags fixed: (sum_k S_k^i x(k-i)^T) (G_i + 2 lambda2 I)^{-1}, assembled from
// the cached cross-Grams.
inline Matrix update_Ri(int i, const LagCoefficients& r, const GramCache& cache) {
    const int m = cache.n_lags;
    if (i < 2 || i > m) throw DimensionError("update_Ri: lag index must be in [2, M]");
    Matrix numer = cache.cross[static_cast<std::size_t>(i - 1)];
    for (int l = 1; l <= m; ++l) {
        if (l == i) continue;
        numer.noalias() -= r.mats[static_cast<std::size_t>(l - 1)] * cache.h(l, i);
    }
    return numer * cache.inv[static_cast<std::size_t>(i - 2)];
}

// Column update of Eq.-6 form: soft-threshold of the partial residual
// correlation with x_j(k-1), divided by d_j. Dead columns (d_j = 0) are
// forced to zero.
inline Vector update_R1_column(Eigen::Index j, const LagCoefficients& r, double lambda1,
                               const GramCache& cache) {
    const Eigen::Index n = cache.n_nodes;
    if (j < 0 || j >= n) throw DimensionError("update_R1_column: node index out of range");
    if (cache.dead[static_cast<std::size_t>(j)]) return Vector::Zero(n);
    Vector numer = cache.cross.front().col(j);
    for (int l = 2; l <= cache.n_lags; ++l)
        numer.noalias() -= r.mats[static_cast<std::size_t>(l - 1)] * cache.h(l, 1).col(j);
    numer.noalias() -= r.mats.front() * cache.gram.front().col(j);
    numer.noalias() += r.mats.front().col(j) * cache.d[j];
    return soft_threshold(numer, lambda1) / cache.d[j];
}

// Smallest lambda1 that zeroes every column of R_1 on the first sweep from a
// zero start: the largest absolute entry of B_1.
inline double lambda_max(const TimeSeries& x, int n_lags) {
    const Eigen::Index k = x.n_samples();
    if (k <= n_lags) throw DataError("insufficient data: need more samples than lags");
    const Eigen::Index t = k - n_lags;
    const Matrix b1 = x.values.middleCols(n_lags, t) * x.values.middleCols(n_lags - 1, t).transpose();
    return b1.cwiseAbs().maxCoeff();
}

inline double in_sample_mse(const TimeSeries& x, const LagCoefficients& r, int n_lags) {
    const Eigen::Index k = x.n_samples();
    if (k <= n_lags) throw DataError("insufficient data: need more samples than lags");
    const Eigen::Index t = k - n_lags;
    Matrix resid = x.values.middleCols(n_lags, t);
    for (int l = 1; l <= n_lags; ++l)
        resid.noalias() -= r.mats[static_cast<std::size_t>(l - 1)] * x.values.middleCols(n_lags - l, t);
    return resid.squaredNorm() / (static_cast<double>(t) * static_cast<double>(x.n_nodes()));
}

struct RStageResult {
    LagCoefficients R;
    AdjacencyMatrix A;
    int n_sweeps = 0;
    StopReason stop_reason = StopReason::max_iter;
    std::vector<double> objective_trace;  // 0.5 * RSS + lambda1 * ||R_1||_1 per sweep
    std::vector<double> mse_trace;
    std::vector<double> ridge_used;
    std::vector<Eigen::Index> dead_columns;
};

namespace detail {

// One full ascending pass of the column CCD over R_1, in place.
// F = B_1 - sum_{l>=2} R_l H_{l,1} stays fixed within the pass.
inline void r1_column_pass(LagCoefficients& r, double lambda1, const GramCache& cache) {
    Matrix f = cache.cross.front();
    for (int l = 2; l <= cache.n_lags; ++l)
        f.noalias() -= r.mats[static_cast<std::size_t>(l - 1)] * cache.h(l, 1);
    Matrix& r1 = r.mats.front();
    const Matrix& g1 = cache.gram.front();
    for (Eigen::Index j = 0; j < cache.n_nodes; ++j) {
        if (cache.dead[static_cast<std::size_t>(j)]) {
            r1.col(j).setZero();
            continue;
        }
        Vector numer = f.col(j);
        numer.noalias() -= r1 * g1.col(j);
        numer.noalias() += r1.col(j) * cache.d[j];
        r1.col(j) = soft_threshold(numer, lambda1) / cache.d[j];
    }
}

// Residual-based evaluation: the Gram-expanded algebraic form cancels
// catastrophically once the fit approaches the data, which matters both for
// the monotonicity stop rules and for noiseless recovery.
inline double residual_rss(const TimeSeries& x, const LagCoefficients& r, int n_lags) {
    const Eigen::Index t = x.n_samples() - n_lags;
    Matrix resid = x.values.middleCols(n_lags, t);
    for (int l = 1; l <= n_lags; ++l)
        resid.noalias() -= r.mats[static_cast<std::size_t>(l - 1)] * x.values.middleCols(n_lags - l, t);
    return resid.squaredNorm();
}

inline double l1_norm(const LagCoefficients& r) {
    double s = 0.0;
    for (const Matrix& m : r.mats) s += m.cwiseAbs().sum();
    return s;
}

}  // namespace detail

// Algorithm: block CCD from a zero start. Each sweep runs the column CCD over
// R_1, then the exact matrix updates for lags i = 2..M, and stops at the
// first of: max iterations, L1 parameter delta below epsilon, absolute
// in-sample MSE delta below epsilon, or an MSE increase (in which case the
// pre-increase iterate is kept). A final extra column pass on R_1 yields the
// adjacency matrix.
inline RStageResult compute_R(const TimeSeries& x, int n_lags, const SolverOptions& opts,
                              const GramCache& cache) {
    const Eigen::Index n = x.n_nodes();
    const Eigen::Index t = cache.window();
    const double denom = static_cast<double>(t) * static_cast<double>(n);

    RStageResult res;
    res.ridge_used = cache.ridge;
    for (Eigen::Index j = 0; j < n; ++j)
        if (cache.dead[static_cast<std::size_t>(j)]) res.dead_columns.push_back(j);

    LagCoefficients r = LagCoefficients::zeros(n, n_lags);
    LagCoefficients best = r;
    double prev_mse = std::numeric_limits<double>::infinity();
    StopReason reason = StopReason::max_iter;
    int sweeps = 0;

    for (int sweep = 1; sweep <= opts.max_iterations; ++sweep) {
        LagCoefficients prev = r;
        detail::r1_column_pass(r, opts.lambda1, cache);
        for (int i = 2; i <= n_lags; ++i)
            r.mats[static_cast<std::size_t>(i - 1)] = update_Ri(i, r, cache);

        const double rss = detail::residual_rss(x, r, n_lags);
        const double mse = rss / denom;
        res.objective_trace.push_back(0.5 * rss + opts.lambda1 * r.mats.front().cwiseAbs().sum());
        res.mse_trace.push_back(mse);
        sweeps = sweep;

        if (mse > prev_mse) {
            r = prev;
            reason = StopReason::mse_increase;
            break;
        }
        best = r;
        double delta = 0.0;
        for (int l = 0; l < n_lags; ++l)
            delta += (r.mats[static_cast<std::size_t>(l)] - prev.mats[static_cast<std::size_t>(l)]).cwiseAbs().sum();
        if (delta < opts.epsilon) {
            reason = StopReason::param_delta;
            break;
        }
        if (std::abs(mse - prev_mse) < opts.epsilon) {
            reason = StopReason::mse_delta;
            break;
        }
        prev_mse = mse;
        reason = StopReason::max_iter;
    }

    res.n_sweeps = sweeps;
    res.stop_reason = reason;
    res.R = (reason == StopReason::mse_increase) ? best : r;

    LagCoefficients extract = res.R;
    detail::r1_column_pass(extract, opts.lambda1, cache);
    res.A = AdjacencyMatrix(extract.mats.front());
    return res;
}

inline RStageResult compute_R(const TimeSeries& x, int n_lags, const SolverOptions& opts) {
    if (x.n_nodes() < 1) throw DataError("compute_R: empty series");
    GramCache cache = build_gram_cache(x, n_lags, opts.ridge_lambda2);
    return compute_R(x, n_lags, opts, cache);
}

// Polynomial-coefficient stage: CCD over the free coefficients (l >= 2,
// j = 0..l) of the penalized least-squares problem with the adjacency matrix
// fixed. Powers A^j x are computed once up front.
inline PolyCoefficients fit_C(const TimeSeries& x, const AdjacencyMatrix& a_hat, int n_lags,
                              const SolverOptions& opts) {
    const Eigen::Index k = x.n_samples();
    const Eigen::Index n = x.n_nodes();
    if (k <= n_lags) throw DataError("fit_C: insufficient data");
    if (a_hat.n_nodes() != n) throw DimensionError("fit_C: dimension mismatch");

    PolyCoefficients c(n_lags);
    if (n_lags == 1) return c;

    const Eigen::Index t = k - n_lags;
    const double km = static_cast<double>(t);

    // powers[j] = A^j X, j = 0..M
    std::vector<Matrix> powers;
    powers.reserve(static_cast<std::size_t>(n_lags) + 1);
    powers.push_back(x.values);
    for (int j = 1; j <= n_lags; ++j)
        powers.push_back(a_hat.weights * powers.back());

    struct Term {
        int lag;
        int power;
    };
    std::vector<Term> terms;
    for (int l = 2; l <= n_lags; ++l)
        for (int j = 0; j <= l; ++j) terms.push_back({l, j});
    const std::size_t p = terms.size();

    const auto block = [&](const Term& term) {
        return powers[static_cast<std::size_t>(term.power)].middleCols(n_lags - term.lag, t);
    };
    Matrix y = x.values.middleCols(n_lags, t);
    y.noalias() -= a_hat.weights * x.values.middleCols(n_lags - 1, t);

    Matrix gram(p, p);
    Vector target(p);
    for (std::size_t u = 0; u < p; ++u) {
        target[static_cast<Eigen::Index>(u)] = block(terms[u]).cwiseProduct(y).sum();
        for (std::size_t v = 0; v <= u; ++v) {
            const double g = block(terms[u]).cwiseProduct(block(terms[v])).sum();
            gram(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = g;
            gram(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = g;
        }
    }

    Vector coef = Vector::Zero(static_cast<Eigen::Index>(p));
    for (int it = 0; it < opts.max_iterations; ++it) {
        double delta = 0.0;
        for (std::size_t u = 0; u < p; ++u) {
            const auto ui = static_cast<Eigen::Index>(u);
            const double partial = target[ui] - gram.row(ui).dot(coef) + gram(ui, ui) * coef[ui];
            const double denom = gram(ui, ui) + 2.0 * km * opts.lambda2_c;
            const double updated = denom > 0.0 ? soft_threshold(partial, km * opts.lambda1_c) / denom : 0.0;
            delta += std::abs(updated - coef[ui]);
            coef[ui] = updated;
        }
        if (delta < opts.epsilon) break;
    }
    for (std::size_t u = 0; u < p; ++u)
        c.set(terms[u].lag, terms[u].power, coef[static_cast<Eigen::Index>(u)]);
    return c;
}

struct FitResult {
    LagCoefficients R;
    AdjacencyMatrix A;
    PolyCoefficients C;
    int n_sweeps = 0;
    StopReason stop_reason = StopReason::max_iter;
    std::vector<double> objective_trace;
    std::vector<double> ridge_used;
    std::vector<Eigen::Index> dead_columns;
};

inline FitResult fit(const TimeSeries& x, int n_lags, const SolverOptions& opts) {
    RStageResult stage = compute_R(x, n_lags, opts);
    PolyCoefficients c = fit_C(x, stage.A, n_lags, opts);
    return FitResult{std::move(stage.R), std::move(stage.A), std::move(c),
                     stage.n_sweeps, stage.stop_reason, std::move(stage.objective_trace),
                     std::move(stage.ridge_used), std::move(stage.dead_columns)};
}

}  // namespace cgp
