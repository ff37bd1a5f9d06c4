#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "cgp/solver.hpp"
#include "cgp/types.hpp"

namespace cgp {

// Per-node edge-normalized prediction error. Column j of A predicts its
// out-neighbors from the lag-1 value of node j; each node's squared error is
// averaged over time and divided by its out-edge count. Nodes without
// out-edges contribute nothing. An all-zero A has no model at all and maps
// to the +infinity sentinel.
inline double err_metric(const TimeSeries& x, const AdjacencyMatrix& a, int n_lags) {
    const Eigen::Index n = x.n_nodes();
    const Eigen::Index k = x.n_samples();
    if (a.n_nodes() != n) throw DimensionError("err_metric: dimension mismatch");
    if (k <= n_lags) throw DataError("err_metric: insufficient data");
    if (a.edge_count() == 0) return std::numeric_limits<double>::infinity();

    const Eigen::Index t = k - n_lags;
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double edges = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (a.weights(i, j) != 0.0) edges += 1.0;
        if (edges == 0.0) continue;
        double sq = 0.0;
        for (Eigen::Index kk = n_lags; kk < k; ++kk) {
            const double xj = x.values(j, kk - 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double w = a.weights(i, j);
                if (w == 0.0) continue;
                const double e = x.values(i, kk) - w * xj;
                sq += e * e;
            }
        }
        total += sq / (edges * static_cast<double>(t));
    }
    return total;
}

// Same as err_metric but normalized by the absolute out-degree of each node.
inline double err_degree_metric(const TimeSeries& x, const AdjacencyMatrix& a, int n_lags) {
    const Eigen::Index n = x.n_nodes();
    const Eigen::Index k = x.n_samples();
    if (a.n_nodes() != n) throw DimensionError("err_degree_metric: dimension mismatch");
    if (k <= n_lags) throw DataError("err_degree_metric: insufficient data");
    if (a.edge_count() == 0) return std::numeric_limits<double>::infinity();

    const Eigen::Index t = k - n_lags;
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double degree = a.weights.col(j).cwiseAbs().sum();
        if (degree == 0.0) continue;
        double sq = 0.0;
        for (Eigen::Index kk = n_lags; kk < k; ++kk) {
            const double xj = x.values(j, kk - 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double w = a.weights(i, j);
                if (w == 0.0) continue;
                const double e = x.values(i, kk) - w * xj;
                sq += e * e;
            }
        }
        total += sq / (degree * static_cast<double>(t));
    }
    return total;
}

struct InfoCriteria {
    double aic;
    double bic;
};

// Gaussian-likelihood form with the nonzero edge count as the parameter
// count. Undefined (nullopt) when the residual sum of squares vanishes.
inline std::optional<InfoCriteria> information_criteria(const TimeSeries& x,
                                                        const LagCoefficients& r,
                                                        const AdjacencyMatrix& a, int n_lags) {
    const double n_resid =
        static_cast<double>(x.n_nodes()) * static_cast<double>(x.n_samples() - n_lags);
    const double rss = in_sample_mse(x, r, n_lags) * n_resid;
    if (rss <= 0.0) return std::nullopt;
    const double p = static_cast<double>(a.edge_count());
    const double base = n_resid * std::log(rss / n_resid);
    return InfoCriteria{base + 2.0 * p, base + p * std::log(n_resid)};
}

// One-step-ahead MSE of a fitted model over a held-out window; lag history
// comes from the test window itself.
inline double mse_out(const TimeSeries& /*x_train*/, const TimeSeries& x_test,
                      const LagCoefficients& r, int n_lags) {
    if (x_test.n_samples() <= n_lags)
        throw DataError("mse_out: test window shorter than the lag order");
    return in_sample_mse(x_test, r, n_lags);
}

struct LambdaGrid {
    std::vector<double> values;

    LambdaGrid() = default;
    explicit LambdaGrid(std::vector<double> v) : values(std::move(v)) {
        if (values.empty()) throw DataError("lambda grid must be nonempty");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] < 0.0) throw DataError("lambda grid values must be nonnegative");
            if (i > 0 && values[i] <= values[i - 1])
                throw DataError("lambda grid must be strictly increasing");
        }
    }

    static LambdaGrid logarithmic(double lo, double hi, int count) {
        if (!(lo > 0.0) || !(hi > lo) || count < 2)
            throw DataError("invalid logarithmic grid parameters");
        std::vector<double> v(static_cast<std::size_t>(count));
        const double step = std::log(hi / lo) / (count - 1);
        for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
        v.back() = hi;
        return LambdaGrid(std::move(v));
    }

    static LambdaGrid linear(double lo, double hi, double step) {
        if (!(step > 0.0) || hi < lo) throw DataError("invalid linear grid parameters");
        std::vector<double> v;
        for (double x = lo; x <= hi + 1e-12 * step; x += step) v.push_back(x);
        return LambdaGrid(std::move(v));
    }
};

// 30 log-spaced values anchored at the data's lambda_max.
inline LambdaGrid default_grid(const TimeSeries& x, int n_lags, int count = 30) {
    const double lmax = lambda_max(x, n_lags);
    if (!(lmax > 0.0)) throw DataError("default_grid: series has no signal");
    return LambdaGrid::logarithmic(0.01 * lmax, lmax, count);
}

struct CurveRow {
    double lambda1 = 0.0;
    bool ok = false;
    std::string error;
    Eigen::Index edge_count = 0;
    std::optional<double> err;
    std::optional<double> err_d;
    std::optional<double> aic;
    std::optional<double> bic;
    std::optional<double> mse_in;
    std::optional<double> mse_out;
    Matrix a_hat;
};

struct SelectionCurve {
    std::vector<CurveRow> rows;  // sorted by lambda1
};

enum class SelectionMode { err_pair, err_pair_plus_bic };

struct SweepOptions {
    double test_fraction = 0.2;   // contiguous tail held out for mse_out
    bool out_of_sample_err = false;  // evaluate err metrics on the held-out tail
    int n_threads = 0;            // 0 = automatic (capped by CGP_MAX_THREADS)
};

namespace detail {

inline int worker_count(int requested, std::size_t jobs) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* cap = std::getenv("CGP_MAX_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1) n = std::min(n, c);
    }
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), jobs));
}

}  // namespace detail

// Fits the model at every grid value on the training window and records all
// selection metrics. Per-lambda failures become not-ok rows instead of
// aborting the sweep.
inline SelectionCurve sweep(const TimeSeries& x, int n_lags, const LambdaGrid& grid,
                            const SolverOptions& opts, const SweepOptions& sweep_opts = {}) {
    const Eigen::Index k = x.n_samples();
    Eigen::Index test_len = static_cast<Eigen::Index>(std::floor(sweep_opts.test_fraction * k));
    if (test_len <= n_lags) test_len = 0;  // too short for a held-out window
    const Eigen::Index train_len = k - test_len;
    if (train_len <= n_lags) throw DataError("sweep: series too short");

    const TimeSeries train(x.values.leftCols(train_len));
    std::optional<TimeSeries> test;
    if (test_len > 0) test.emplace(x.values.rightCols(test_len));
    const TimeSeries& metric_series = (sweep_opts.out_of_sample_err && test) ? *test : train;

    GramCache cache = build_gram_cache(train, n_lags, opts.ridge_lambda2);

    SelectionCurve curve;
    curve.rows.resize(grid.values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= grid.values.size()) return;
            CurveRow& row = curve.rows[idx];
            row.lambda1 = grid.values[idx];
            try {
                SolverOptions o = opts;
                o.lambda1 = row.lambda1;
                RStageResult fit = compute_R(train, n_lags, o, cache);
                row.edge_count = fit.A.edge_count();
                const double e = err_metric(metric_series, fit.A, n_lags);
                const double ed = err_degree_metric(metric_series, fit.A, n_lags);
                if (std::isfinite(e)) row.err = e;
                if (std::isfinite(ed)) row.err_d = ed;
                if (auto ic = information_criteria(train, fit.R, fit.A, n_lags)) {
                    row.aic = ic->aic;
                    row.bic = ic->bic;
                }
                row.mse_in = in_sample_mse(train, fit.R, n_lags);
                if (test) row.mse_out = mse_out(train, *test, fit.R, n_lags);
                row.a_hat = fit.A.weights;
                row.ok = true;
            } catch (const std::exception& ex) {
                row.ok = false;
                row.error = ex.what();
            }
        }
    };
    const int n_workers = detail::worker_count(sweep_opts.n_threads, grid.values.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return curve;
}

// Peak = global maximum of the 3-point moving average over the defined
// points, accepted only at an interior grid position.
inline std::optional<double> find_peak(const std::vector<double>& lambdas,
                                       const std::vector<std::optional<double>>& values) {
    std::vector<double> lam, val;
    for (std::size_t i = 0; i < lambdas.size() && i < values.size(); ++i) {
        if (values[i] && std::isfinite(*values[i])) {
            lam.push_back(lambdas[i]);
            val.push_back(*values[i]);
        }
    }
    const std::size_t n = lam.size();
    if (n < 3) return std::nullopt;
    std::vector<double> smooth(n);
    smooth.front() = (val[0] + val[1]) / 2.0;
    smooth.back() = (val[n - 1] + val[n - 2]) / 2.0;
    for (std::size_t i = 1; i + 1 < n; ++i) smooth[i] = (val[i - 1] + val[i] + val[i + 1]) / 3.0;
    const std::size_t arg = static_cast<std::size_t>(
        std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    if (arg == 0 || arg == n - 1) return std::nullopt;
    return lam[arg];
}

struct Selection {
    double lambda1 = 0.0;
    std::optional<double> err_peak;
    std::optional<double> err_d_peak;
    std::optional<double> bic_min;  // only inspected in err_pair_plus_bic mode

    std::string describe() const {
        std::ostringstream os;
        os << "lambda1=" << lambda1;
        if (err_peak) os << " err_peak=" << *err_peak;
        if (err_d_peak) os << " err_d_peak=" << *err_d_peak;
        if (bic_min) os << " bic_min=" << *bic_min;
        return os.str();
    }
};

// Combination rule: mean of the available peak locations (and, in the
// extended mode, the BIC-minimizing lambda); fails when nothing usable
// exists so the caller can widen the grid.
inline Selection select_lambda(const SelectionCurve& curve, SelectionMode mode) {
    if (curve.rows.empty()) throw SelectionError("selection on an empty curve");
    std::vector<double> lambdas;
    std::vector<std::optional<double>> err, err_d;
    for (const CurveRow& row : curve.rows) {
        lambdas.push_back(row.lambda1);
        err.push_back(row.ok ? row.err : std::nullopt);
        err_d.push_back(row.ok ? row.err_d : std::nullopt);
    }
    Selection sel;
    sel.err_peak = find_peak(lambdas, err);
    sel.err_d_peak = find_peak(lambdas, err_d);

    std::vector<double> picks;
    if (sel.err_peak) picks.push_back(*sel.err_peak);
    if (sel.err_d_peak) picks.push_back(*sel.err_d_peak);
    if (mode == SelectionMode::err_pair_plus_bic) {
        std::optional<double> best;
        for (const CurveRow& row : curve.rows)
            if (row.ok && row.bic && (!best || *row.bic < *best)) {
                best = *row.bic;
                sel.bic_min = row.lambda1;
            }
        if (sel.bic_min) picks.push_back(*sel.bic_min);
    }
    if (picks.empty())
        throw SelectionError("no usable peak in any enabled metric; widen the lambda grid");
    double sum = 0.0;
    for (double p : picks) sum += p;
    sel.lambda1 = sum / static_cast<double>(picks.size());
    return sel;
}

// Lambda of the row minimizing mse_out, when any row has one.
inline std::optional<double> mse_out_minimizer(const SelectionCurve& curve) {
    std::optional<double> best_val, best_lam;
    for (const CurveRow& row : curve.rows)
        if (row.ok && row.mse_out && (!best_val || *row.mse_out < *best_val)) {
            best_val = *row.mse_out;
            best_lam = row.lambda1;
        }
    return best_lam;
}

}  // namespace cgp
