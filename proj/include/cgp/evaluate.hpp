#pragma once

#include <chrono>
#include <numeric>

#include "cgp/sbm.hpp"
#include "cgp/select.hpp"

namespace cgp {

struct RecoveryReport {
    Eigen::Index nbde = 0;       // |edges(A_hat) - edges(A_true)|
    double nbde_pct = 0.0;       // nbde / N^2 * 100
    double true_positive_pct = 0.0;
    double false_positive_pct = 0.0;
    double adjacency_mse = 0.0;  // squared Frobenius / N^2
};

inline RecoveryReport recovery_report(const AdjacencyMatrix& a_true, const AdjacencyMatrix& a_hat) {
    if (a_true.n_nodes() != a_hat.n_nodes())
        throw DimensionError("recovery_report: dimension mismatch");
    const Eigen::Index n = a_true.n_nodes();
    Eigen::Index true_edges = 0, est_edges = 0, tp = 0, fp = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool t = a_true.weights(i, j) != 0.0;
            const bool e = a_hat.weights(i, j) != 0.0;
            true_edges += t;
            est_edges += e;
            tp += t && e;
            fp += e && !t;
        }
    RecoveryReport rep;
    rep.nbde = std::abs(est_edges - true_edges);
    rep.nbde_pct = 100.0 * static_cast<double>(rep.nbde) /
                   (static_cast<double>(n) * static_cast<double>(n));
    rep.true_positive_pct =
        true_edges > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(true_edges) : 0.0;
    rep.false_positive_pct =
        est_edges > 0 ? 100.0 * static_cast<double>(fp) / static_cast<double>(est_edges) : 0.0;
    rep.adjacency_mse = (a_hat.weights - a_true.weights).squaredNorm() /
                        (static_cast<double>(n) * static_cast<double>(n));
    return rep;
}

struct BenchmarkEnv {
    Eigen::Index n_nodes;
    int n_clusters;
    int sim_lags;
    Eigen::Index k_samples;
    int fit_lags = 0;  // 0 = same as sim_lags
};

struct BenchmarkOptions {
    SolverOptions solver;
    SelectionMode mode = SelectionMode::err_pair;
    double noise_sigma = 0.01;
    double target_density = 0.021;
    double spectral_target = 0.5;
    int grid_size = 30;
    double grid_min_frac = 0.1;  // low grid anchor as a fraction of lambda_max
    int n_threads = 0;
    std::uint64_t base_seed = 1;
};

struct BenchmarkRow {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double lambda1 = 0.0;
    double true_density = 0.0;
    RecoveryReport report;
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;
    RecoveryReport median;
    RecoveryReport iqr;  // dispersion, labeled as interquartile range
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

template <typename Getter>
inline void fill_stat(const std::vector<BenchmarkRow>& rows, Getter get, double& med, double& iqr) {
    std::vector<double> v;
    for (const auto& row : rows)
        if (row.ok) v.push_back(get(row));
    med = percentile(v, 0.5);
    iqr = percentile(v, 0.75) - percentile(v, 0.25);
}

}  // namespace detail

// Full recovery pipeline for one instance: sweep over a lambda_max-anchored
// grid, automatic lambda selection, refit on the whole series at the chosen
// value. The grid spans one decade below lambda_max; wider grids spend most
// points deep in the overfit plateau, where the err metrics carry no peak
// information and selection turns unstable.
inline std::pair<AdjacencyMatrix, double> recover_adjacency(const TimeSeries& x, int n_lags,
                                                            const SolverOptions& opts,
                                                            SelectionMode mode, int grid_size = 30,
                                                            int n_threads = 1,
                                                            double grid_min_frac = 0.1) {
    SweepOptions so;
    so.n_threads = n_threads;
    const double lmax = lambda_max(x, n_lags);
    if (!(lmax > 0.0)) throw DataError("recover_adjacency: series has no signal");
    const LambdaGrid grid = LambdaGrid::logarithmic(grid_min_frac * lmax, lmax, grid_size);
    SelectionCurve curve = sweep(x, n_lags, grid, opts, so);
    Selection sel = select_lambda(curve, mode);
    SolverOptions o = opts;
    o.lambda1 = sel.lambda1;
    RStageResult refit = compute_R(x, n_lags, o);
    return {std::move(refit.A), sel.lambda1};
}

inline BenchmarkResult run_benchmark(const BenchmarkEnv& env, int n_samples,
                                     const BenchmarkOptions& opts = {}) {
    if (n_samples < 1) throw DataError("run_benchmark: need at least one sample");
    const int fit_lags = env.fit_lags > 0 ? env.fit_lags : env.sim_lags;

    BenchmarkResult result;
    result.rows.resize(static_cast<std::size_t>(n_samples));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= result.rows.size()) return;
            BenchmarkRow& row = result.rows[idx];
            row.seed = opts.base_seed + idx;
            try {
                SbmParams p;
                p.n_nodes = env.n_nodes;
                p.n_clusters = env.n_clusters;
                p.target_density = opts.target_density;
                p.spectral_target = opts.spectral_target;
                p.seed = row.seed;
                CgpInstance inst =
                    generate_instance(p, env.sim_lags, env.k_samples, opts.noise_sigma);
                auto [a_hat, lambda1] =
                    recover_adjacency(inst.X, fit_lags, opts.solver, opts.mode, opts.grid_size,
                                      1, opts.grid_min_frac);
                row.lambda1 = lambda1;
                row.true_density = inst.density;
                row.report = recovery_report(inst.A_true, a_hat);
                row.ok = true;
            } catch (const std::exception& ex) {
                row.ok = false;
                row.error = ex.what();
            }
        }
    };
    const int n_workers =
        detail::worker_count(opts.n_threads, static_cast<std::size_t>(n_samples));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::size_t failures = 0;
    for (const auto& row : result.rows) failures += !row.ok;
    if (2 * failures >= result.rows.size())
        throw Error("benchmark", "at least half of the benchmark seeds failed");

    {
        double med = 0.0, spread = 0.0;
        detail::fill_stat(result.rows,
                          [](const BenchmarkRow& r) { return static_cast<double>(r.report.nbde); },
                          med, spread);
        result.median.nbde = static_cast<Eigen::Index>(std::llround(med));
        result.iqr.nbde = static_cast<Eigen::Index>(std::llround(spread));
    }
    detail::fill_stat(result.rows, [](const BenchmarkRow& r) { return r.report.nbde_pct; },
                      result.median.nbde_pct, result.iqr.nbde_pct);
    detail::fill_stat(result.rows, [](const BenchmarkRow& r) { return r.report.true_positive_pct; },
                      result.median.true_positive_pct, result.iqr.true_positive_pct);
    detail::fill_stat(result.rows, [](const BenchmarkRow& r) { return r.report.false_positive_pct; },
                      result.median.false_positive_pct, result.iqr.false_positive_pct);
    detail::fill_stat(result.rows, [](const BenchmarkRow& r) { return r.report.adjacency_mse; },
                      result.median.adjacency_mse, result.iqr.adjacency_mse);
    return result;
}

// Wall time of one compute_R call on a freshly generated instance.
inline double measure_fit_seconds(Eigen::Index n_nodes, int n_clusters, int n_lags,
                                  Eigen::Index k_samples, std::uint64_t seed,
                                  const SolverOptions& opts) {
    SbmParams p;
    p.n_nodes = n_nodes;
    p.n_clusters = n_clusters;
    p.seed = seed;
    CgpInstance inst = generate_instance(p, n_lags, k_samples);
    SolverOptions o = opts;
    if (o.lambda1 <= 0.0) o.lambda1 = 0.1 * lambda_max(inst.X, n_lags);
    const auto start = std::chrono::steady_clock::now();
    RStageResult fit = compute_R(inst.X, n_lags, o);
    const auto stop = std::chrono::steady_clock::now();
    (void)fit;
    return std::chrono::duration<double>(stop - start).count();
}

struct TimingRow {
    Eigen::Index n_nodes;
    double seconds;
};

struct TimingProfile {
    std::vector<TimingRow> rows;
    std::optional<double> loglog_slope;  // undefined with fewer than two sizes
};

inline TimingProfile timing_profile(const std::vector<Eigen::Index>& sizes, double cluster_ratio,
                                    int n_lags, Eigen::Index k_samples,
                                    const SolverOptions& opts = {}, std::uint64_t seed = 1) {
    TimingProfile prof;
    for (Eigen::Index n : sizes) {
        const int clusters = std::max(1, static_cast<int>(std::lround(n * cluster_ratio)));
        prof.rows.push_back({n, measure_fit_seconds(n, clusters, n_lags, k_samples, seed, opts)});
    }
    if (prof.rows.size() >= 2) {
        // least-squares slope of log(time) against log(N)
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& row : prof.rows) {
            const double lx = std::log(static_cast<double>(row.n_nodes));
            const double ly = std::log(std::max(row.seconds, 1e-9));
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        const double m = static_cast<double>(prof.rows.size());
        prof.loglog_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return prof;
}

}  // namespace cgp
