#pragma once

#include <random>

#include "cgp/types.hpp"

namespace cgp {

// P_l(A) = sum_{j=0}^{l} c_{l,j} A^j, evaluated by Horner accumulation so the
// result is well defined for non-diagonalizable A.
inline Matrix graph_filter(const AdjacencyMatrix& a, const PolyCoefficients& coeffs, int lag) {
    if (lag < 1 || lag > coeffs.n_lags())
        throw DimensionError("graph_filter: lag out of range");
    const Eigen::Index n = a.n_nodes();
    // Horner: ((c_l A + c_{l-1} I) A + ...) + c_0 I
    Matrix acc = coeffs.at(lag, lag) * Matrix::Identity(n, n);
    for (int j = lag - 1; j >= 0; --j) {
        acc = acc * a.weights;
        acc.diagonal().array() += coeffs.at(lag, j);
    }
    return acc;
}

// One-step prediction sum_{l=1}^{M} R_l x(k-l).
inline Vector predict(const TimeSeries& x, const LagCoefficients& r, Eigen::Index k) {
    const int m = r.n_lags();
    if (k < m || k >= x.n_samples())
        throw DimensionError("predict: time index out of range");
    if (x.n_nodes() != r.n_nodes())
        throw DimensionError("predict: node-count mismatch");
    Vector out = Vector::Zero(x.n_nodes());
    for (int l = 1; l <= m; ++l)
        out.noalias() += r.mats[static_cast<std::size_t>(l - 1)] * x.values.col(k - l);
    return out;
}

namespace detail {

inline void check_overflow(const Vector& state, Eigen::Index step) {
    constexpr double kOverflowGuard = 1e12;
    for (Eigen::Index i = 0; i < state.size(); ++i) {
        if (!(std::abs(state[i]) <= kOverflowGuard))
            throw InstabilityError("simulate: |x_" + std::to_string(i) + "(" +
                                   std::to_string(step) + ")| exceeds overflow guard");
    }
}

}  // namespace detail

// Generates burn_in + K steps of the autoregressive process driven by i.i.d.
// Gaussian noise from zero history, returning the last K columns.
// Deterministic given the seed.
// initial_history, when nonempty, supplies [x(-1), x(-2), ..., x(-M)];
// the default is zero history.
inline TimeSeries simulate(const AdjacencyMatrix& a, const PolyCoefficients& coeffs,
                           Eigen::Index k_samples, Eigen::Index burn_in,
                           const NoiseSpec& noise,
                           const std::vector<Vector>& initial_history = {}) {
    if (k_samples < 1) throw DimensionError("simulate: need K >= 1");
    if (burn_in < 0) throw DimensionError("simulate: burn_in must be nonnegative");
    const Eigen::Index n = a.n_nodes();
    const int m = coeffs.n_lags();
    if (!initial_history.empty() && initial_history.size() != static_cast<std::size_t>(m))
        throw DimensionError("simulate: initial history must cover all M lags");

    std::vector<Matrix> filters;
    filters.reserve(static_cast<std::size_t>(m));
    for (int l = 1; l <= m; ++l) filters.push_back(graph_filter(a, coeffs, l));

    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const Eigen::Index total = burn_in + k_samples;
    Matrix out(n, total);
    // history[0] = x(k-1), history[1] = x(k-2), ...
    std::vector<Vector> history = initial_history.empty()
        ? std::vector<Vector>(static_cast<std::size_t>(m), Vector::Zero(n))
        : initial_history;
    Vector state(n);
    for (Eigen::Index k = 0; k < total; ++k) {
        state.setZero();
        for (int l = 1; l <= m; ++l)
            state.noalias() += filters[static_cast<std::size_t>(l - 1)] * history[static_cast<std::size_t>(l - 1)];
        if (noise.sigma > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) state[i] += noise.sigma * gauss(rng);
        }
        detail::check_overflow(state, k);
        for (int l = m - 1; l >= 1; --l) history[static_cast<std::size_t>(l)] = history[static_cast<std::size_t>(l - 1)];
        history[0] = state;
        out.col(k) = state;
    }
    return TimeSeries(out.rightCols(k_samples));
}

}  // namespace cgp
