// Acceptance suite: one pass/fail line per criterion, exit 0 only when all
// criteria hold. Oracles here are written with naive loops, independent of
// the cached formulations inside the library.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <random>

#include "cgp/evaluate.hpp"
#include "cgp/io.hpp"

using namespace cgp;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                     double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --- 1. update_Ri against a dense normal-equations solve ---------------------

void criterion_1() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    const Eigen::Index n = 5;
    const int m = 3;
    const Eigen::Index k = 50;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        TimeSeries x(random_matrix(n, k, rng));
        LagCoefficients r = LagCoefficients::zeros(n, m);
        for (int l = 0; l < m; ++l) r.mats[static_cast<std::size_t>(l)] = random_matrix(n, n, rng);
        GramCache cache = build_gram_cache(x, m, 0.0);

        for (int i = 2; i <= m; ++i) {
            Matrix numer = Matrix::Zero(n, n);
            Matrix gram = Matrix::Zero(n, n);
            for (Eigen::Index kk = m; kk < k; ++kk) {
                Vector s = x.values.col(kk);
                for (int l = 1; l <= m; ++l) {
                    if (l == i) continue;
                    s -= r.mats[static_cast<std::size_t>(l - 1)] * x.values.col(kk - l);
                }
                numer += s * x.values.col(kk - i).transpose();
                gram += x.values.col(kk - i) * x.values.col(kk - i).transpose();
            }
            const Matrix oracle =
                gram.fullPivLu().solve(numer.transpose()).transpose();
            const Matrix got = update_Ri(i, r, cache);
            worst = std::max(worst, (got - oracle).norm() / std::max(oracle.norm(), 1e-300));
        }
    }
    const double secs = elapsed_seconds(start);
    report(1, worst <= 1e-8 && secs < 1.0,
           fmt("lag-matrix update vs normal equations: max rel error %.3e, %.2fs", worst, secs));
}

// --- 2. KKT subgradient conditions at convergence ----------------------------

void criterion_2() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    const Eigen::Index n = 10;
    const Eigen::Index k = 100;
    const int m = 2;
    const double factors[] = {0.001, 0.03, 0.9};
    double worst = 0.0;
    int converged = 0;
    bool magnitude_seen[3] = {false, false, false};
    for (int trial = 0; trial < 20; ++trial) {
        TimeSeries x(random_matrix(n, k, rng));
        SolverOptions opts;
        opts.lambda1 = factors[trial % 3] * lambda_max(x, m);
        opts.epsilon = 1e-15;
        opts.max_iterations = 20000;
        RStageResult res = compute_R(x, m, opts);
        // runs halted mid-descent by the MSE-increase guard are, by
        // definition, not converged; their columns carry no KKT promise
        if (res.stop_reason != StopReason::param_delta &&
            res.stop_reason != StopReason::mse_delta)
            continue;
        ++converged;
        magnitude_seen[trial % 3] = true;

        for (Eigen::Index j = 0; j < n; ++j) {
            double dj = 0.0;
            Vector rho = Vector::Zero(n);
            for (Eigen::Index kk = m; kk < k; ++kk) {
                const double xj = x.values(j, kk - 1);
                dj += xj * xj;
                Vector s = x.values.col(kk);
                for (int l = 1; l <= m; ++l)
                    s -= res.R.mats[static_cast<std::size_t>(l - 1)] * x.values.col(kk - l);
                s += res.R.mats.front().col(j) * xj;  // add the column's own part back
                rho += s * xj;
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                const double rij = res.R.mats.front()(i, j);
                double viol;
                if (rij != 0.0)
                    viol = std::abs(rho[i] - dj * rij -
                                    opts.lambda1 * (rij > 0.0 ? 1.0 : -1.0));
                else
                    viol = std::max(0.0, std::abs(rho[i]) - opts.lambda1);
                worst = std::max(worst, viol / dj);  // coefficient-scale violation
            }
        }
    }
    const double secs = elapsed_seconds(start);
    const bool coverage =
        converged >= 10 && magnitude_seen[0] && magnitude_seen[1] && magnitude_seen[2];
    report(2, worst <= 1e-6 && coverage && secs < 30.0,
           fmt("subgradient conditions: max violation %.3e over %d/20 converged runs "
               "(all 3 lambda magnitudes %s), %.2fs",
               worst, converged, coverage ? "covered" : "NOT covered", secs));
}

// --- 3. single-free-coefficient fit_C vs scalar grid scan --------------------

void criterion_3() {
    std::mt19937_64 rng(303);
    const Eigen::Index n = 4;
    const Eigen::Index k = 60;
    const int m = 2;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        TimeSeries x(random_matrix(n, k, rng));
        AdjacencyMatrix a_hat(Matrix::Zero(n, n));  // only c_{2,0} stays free
        SolverOptions opts;
        opts.lambda1_c = 0.02;
        opts.lambda2_c = 0.05;
        opts.epsilon = 1e-14;
        opts.max_iterations = 1000;
        const double got = fit_C(x, a_hat, m, opts).at(2, 0);

        const Eigen::Index t = k - m;
        const double km = static_cast<double>(t);
        const Matrix y = x.values.middleCols(m, t);
        const Matrix z = x.values.middleCols(0, t);  // x(k-2)
        const double zz = z.squaredNorm();
        const double zy = z.cwiseProduct(y).sum();
        const double reach = std::abs(zy) / zz + 1.0;
        double best_c = 0.0, best_obj = std::numeric_limits<double>::infinity();
        for (double c = -reach; c <= reach; c += 1e-4) {
            const double obj = 0.5 * (y - c * z).squaredNorm() + km * opts.lambda1_c * std::abs(c) +
                               km * opts.lambda2_c * c * c;
            if (obj < best_obj) {
                best_obj = obj;
                best_c = c;
            }
        }
        worst = std::max(worst, std::abs(got - best_c));
    }
    report(3, worst <= 1e-4,
           fmt("coefficient stage vs 1e-4 grid scan: max deviation %.3e", worst));
}

// --- 4. monotone objective descent -------------------------------------------

void criterion_4() {
    std::mt19937_64 rng(404);
    int violations = 0;
    int traces = 0;
    auto check_trace = [&](const RStageResult& res) {
        ++traces;
        std::size_t upto = res.objective_trace.size();
        if (res.stop_reason == StopReason::mse_increase && upto > 0) --upto;
        for (std::size_t i = 1; i < upto; ++i)
            if (res.objective_trace[i] >
                res.objective_trace[i - 1] + 1e-10 * (1.0 + std::abs(res.objective_trace[i - 1])))
                ++violations;
    };
    for (int trial = 0; trial < 50; ++trial) {
        TimeSeries x(random_matrix(8, 120, rng));
        SolverOptions opts;
        opts.lambda1 = 0.1 * lambda_max(x, 3);
        opts.epsilon = 1e-10;
        opts.max_iterations = 200;
        check_trace(compute_R(x, 3, opts));
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SbmParams p;
        p.n_nodes = 30;
        p.n_clusters = 3;
        p.target_density = 0.05;
        p.seed = 4000 + seed;
        CgpInstance inst = generate_instance(p, 3, 400);
        SolverOptions opts;
        opts.lambda1 = 0.05 * lambda_max(inst.X, 3);
        opts.epsilon = 1e-10;
        opts.max_iterations = 200;
        check_trace(compute_R(inst.X, 3, opts));
    }
    report(4, violations == 0,
           fmt("objective descent over %d traces: %d violations beyond 1e-10 slack", traces, violations));
}

// --- 5. noiseless identifiability at lag one ---------------------------------

void criterion_5() {
    const Eigen::Index n = 20;
    const Eigen::Index k = 10 * n;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(500 + seed);
        // a scaled orthogonal generator keeps the single noiseless trajectory
        // exciting every direction, so A is identifiable from one orbit
        Eigen::HouseholderQR<Matrix> qr(random_matrix(n, n, rng));
        Matrix q = qr.householderQ();
        AdjacencyMatrix a_true(0.999 * q);

        PolyCoefficients c(1);
        std::vector<Vector> history{random_matrix(n, 1, rng)};
        TimeSeries x = simulate(a_true, c, k, 0, NoiseSpec(0.0, 0), history);

        SolverOptions opts;
        opts.lambda1 = 0.0;
        opts.epsilon = 0.0;  // run to the numerical floor
        opts.max_iterations = 5000;
        RStageResult res = compute_R(x, 1, opts);
        worst = std::max(worst, (res.A.weights - a_true.weights).cwiseAbs().maxCoeff());
    }
    report(5, worst <= 1e-6,
           fmt("noiseless lag-1 recovery over 10 seeds: max entry error %.3e", worst));
}

// --- 6. lambda_max zeroes the adjacency --------------------------------------

void criterion_6() {
    bool all_zero = true;
    Eigen::Index worst_edges = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SbmParams p;
        p.n_nodes = 30;
        p.n_clusters = 3;
        p.target_density = 0.05;
        p.seed = 600 + seed;
        CgpInstance inst = generate_instance(p, 1, 300);
        SolverOptions opts;
        opts.lambda1 = lambda_max(inst.X, 1);
        RStageResult res = compute_R(inst.X, 1, opts);
        if (res.A.edge_count() != 0) {
            all_zero = false;
            worst_edges = std::max(worst_edges, res.A.edge_count());
        }
    }
    report(6, all_zero,
           fmt("penalty at lambda_max over 10 seeds: %s",
               all_zero ? "all adjacency estimates exactly zero"
                        : fmt("up to %lld surviving edges", static_cast<long long>(worst_edges)).c_str()));
}

// --- 7. benchmark bands on the (100, 5, 3, 1040) environment -----------------

void criterion_7() {
    const auto start = std::chrono::steady_clock::now();
    BenchmarkEnv env{100, 5, 3, 1040, 0};
    BenchmarkOptions opts;
    opts.base_seed = 700;
    BenchmarkResult result = run_benchmark(env, 10, opts);
    const double secs = elapsed_seconds(start);
    const RecoveryReport& med = result.median;
    const bool pass = med.nbde_pct <= 1.0 && med.true_positive_pct >= 60.0 &&
                      med.false_positive_pct <= 35.0 && secs <= 600.0;
    report(7, pass,
           fmt("(100,5,3,1040) x 10 seeds: median NBDE%% %.3f (<=1), TP %.1f%% (>=60), "
               "FP %.1f%% (<=35), %.0fs (<=600)",
               med.nbde_pct, med.true_positive_pct, med.false_positive_pct, secs));
}

// --- 8. err-pair selection beats the mse_out minimizer -----------------------

void criterion_8() {
    std::vector<double> nbde_pair, nbde_mse;
    int usable = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SbmParams p;
        p.n_nodes = 200;
        p.n_clusters = 5;
        p.seed = 800 + seed;
        CgpInstance inst = generate_instance(p, 3, 1040);

        SolverOptions opts;
        SweepOptions so;
        SelectionCurve curve = sweep(inst.X, 3, default_grid(inst.X, 3), opts, so);
        Selection sel = select_lambda(curve, SelectionMode::err_pair);
        std::optional<double> mse_lam = mse_out_minimizer(curve);
        if (!mse_lam) continue;
        ++usable;

        auto refit_nbde = [&](double lambda1) {
            SolverOptions o = opts;
            o.lambda1 = lambda1;
            RStageResult res = compute_R(inst.X, 3, o);
            return recovery_report(inst.A_true, res.A).nbde_pct;
        };
        nbde_pair.push_back(refit_nbde(sel.lambda1));
        nbde_mse.push_back(refit_nbde(*mse_lam));
    }
    if (usable < 5) {
        report(8, false, fmt("only %d/5 seeds produced both selections", usable));
        return;
    }
    const double mp = median(nbde_pair);
    const double mm = median(nbde_mse);
    report(8, mp < mm,
           fmt("median NBDE%%: err-pair rule %.3f vs mse_out minimizer %.3f", mp, mm));
}

// --- 9. qualitative curve shape on one N = 200 sweep -------------------------

void criterion_9() {
    SbmParams p;
    p.n_nodes = 200;
    p.n_clusters = 5;
    p.seed = 900;
    CgpInstance inst = generate_instance(p, 3, 1040);
    SolverOptions opts;
    SelectionCurve curve = sweep(inst.X, 3, default_grid(inst.X, 3), opts);

    std::vector<double> lambdas;
    std::vector<std::optional<double>> err, err_d;
    std::optional<double> mse_lo, mse_hi;
    for (const CurveRow& row : curve.rows) {
        lambdas.push_back(row.lambda1);
        err.push_back(row.ok ? row.err : std::nullopt);
        err_d.push_back(row.ok ? row.err_d : std::nullopt);
        if (row.ok && row.mse_in) {
            if (!mse_lo) mse_lo = row.mse_in;  // rows are sorted by lambda
            mse_hi = row.mse_in;
        }
    }
    const bool peaks = find_peak(lambdas, err).has_value() &&
                       find_peak(lambdas, err_d).has_value();
    const bool mse_ok = mse_lo && mse_hi && *mse_hi >= *mse_lo;
    report(9, peaks && mse_ok,
           fmt("interior peaks err/err^d: %s/%s; MSE_in %.3e at lambda_min vs %.3e at lambda_max",
               find_peak(lambdas, err) ? "yes" : "no", find_peak(lambdas, err_d) ? "yes" : "no",
               mse_lo.value_or(0.0), mse_hi.value_or(0.0)));
}

// --- 10. timing ratios in K and N --------------------------------------------

void criterion_10() {
    SolverOptions opts;
    auto time_at = [&](Eigen::Index n, Eigen::Index k) {
        // median of 3 runs damps scheduler noise
        std::vector<double> t;
        for (std::uint64_t rep = 0; rep < 3; ++rep)
            t.push_back(measure_fit_seconds(n, 5, 3, k, 1000 + rep, opts));
        return median(t);
    };
    const double t_100_1040 = time_at(100, 1040);
    const double t_100_2080 = time_at(100, 2080);
    const double t_200_1040 = time_at(200, 1040);
    const double t_200_2080 = time_at(200, 2080);

    const double rk1 = t_100_2080 / t_100_1040;
    const double rk2 = t_200_2080 / t_200_1040;
    const double rn1 = t_200_1040 / t_100_1040;
    const double rn2 = t_200_2080 / t_100_2080;
    const bool pass = rk1 >= 1.5 && rk1 <= 3.0 && rk2 >= 1.5 && rk2 <= 3.0 &&
                      rn1 >= 3.0 && rn1 <= 6.0 && rn2 >= 3.0 && rn2 <= 6.0;
    report(10, pass,
           fmt("K doubling ratios %.2f, %.2f (want [1.5,3]); N doubling ratios %.2f, %.2f (want [3,6])",
               rk1, rk2, rn1, rn2));
}

// --- 11. lag misspecification ------------------------------------------------

void criterion_11() {
    auto run_case = [&](int sim_lags, int fit_lags) {
        BenchmarkEnv env{200, 5, sim_lags, 1040, fit_lags};
        BenchmarkOptions opts;
        opts.base_seed = 1100;
        return run_benchmark(env, 5, opts).median;
    };
    const RecoveryReport over = run_case(3, 5);   // fit with too many lags
    const RecoveryReport under = run_case(5, 3);  // fit with too few
    auto in_bands = [](const RecoveryReport& r) {
        return r.nbde_pct <= 1.0 && r.true_positive_pct >= 60.0 && r.false_positive_pct <= 35.0;
    };
    report(11, in_bands(over) && in_bands(under),
           fmt("sim 3/fit 5: NBDE%% %.3f TP %.1f FP %.1f; sim 5/fit 3: NBDE%% %.3f TP %.1f FP %.1f",
               over.nbde_pct, over.true_positive_pct, over.false_positive_pct,
               under.nbde_pct, under.true_positive_pct, under.false_positive_pct));
}

// --- 12. rolling regime change and realized-variance oracle ------------------

void criterion_12() {
    // dense then sparse regime, same node count, concatenated in time
    auto make_regime = [](double density, std::uint64_t seed) {
        SbmParams p;
        p.n_nodes = 30;
        p.n_clusters = 3;
        p.target_density = density;
        p.seed = seed;
        return generate_instance(p, 2, 600);
    };
    CgpInstance dense = make_regime(0.10, 1200);
    CgpInstance sparse = make_regime(0.02, 1201);
    Matrix joined(30, 1200);
    joined.leftCols(600) = dense.X.values;
    joined.rightCols(600) = sparse.X.values;
    TimeSeries x(joined);

    PriceOptions popts;
    popts.window = 400;
    popts.step = 200;
    popts.rv_window = 40;
    SolverOptions sopts;
    const auto rows = rolling_analysis(x, popts, 2, sopts);

    double dense_sparsity = 0.0, sparse_sparsity = 0.0;
    int n_dense = 0, n_sparse = 0;
    bool all_ok = true;
    for (const RollingRow& row : rows) {
        if (!row.ok) {
            all_ok = false;
            continue;
        }
        if (row.end <= 600) {
            dense_sparsity += row.sparsity_pct;
            ++n_dense;
        } else if (row.start >= 600) {
            sparse_sparsity += row.sparsity_pct;
            ++n_sparse;
        }
    }
    const bool drop = n_dense > 0 && n_sparse > 0 &&
                      dense_sparsity / n_dense > sparse_sparsity / n_sparse;

    std::mt19937_64 rng(1212);
    TimeSeries rnd(random_matrix(3, 50, rng));
    RealizedVariance rv = realized_variance(rnd, 0.9, 12);
    double wsum = 0.0;
    for (int t = 0; t < 12; ++t) wsum += std::pow(0.9, t);
    double rv_err = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index k = 11; k < 50; ++k) {
            double want = 0.0;
            for (int t = 0; t < 12; ++t)
                want += std::pow(0.9, t) / wsum * rnd.values(i, k - t) * rnd.values(i, k - t);
            rv_err = std::max(rv_err, std::abs(rv.rv(i, k) - want));
        }

    report(12, drop && all_ok && rv_err <= 1e-12,
           fmt("regime sparsity %.2f%% -> %.2f%% (%s); realized-variance oracle error %.3e",
               n_dense ? dense_sparsity / n_dense : 0.0,
               n_sparse ? sparse_sparsity / n_sparse : 0.0,
               drop ? "drop detected" : "no drop", rv_err));
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    std::printf("%s (%d/12 criteria)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
                12 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
