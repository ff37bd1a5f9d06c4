// Command-line front end: simulate CGP-SBM instances, fit at a fixed
// lambda, run automatic lambda selection, benchmark recovery quality over
// seeds, and run rolling-window analyses on price/return CSVs.

#include <CLI11.hpp>
#include <iostream>

#include "cgp/io.hpp"

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

std::uint64_t config_hash(int argc, char** argv) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (int i = 1; i < argc; ++i)
        for (const char* p = argv[i]; *p; ++p) {
            h ^= static_cast<unsigned char>(*p);
            h *= 1099511628211ULL;
        }
    return h;
}

cgp::Json base_metadata(int argc, char** argv) {
    cgp::Json meta;
    meta["tool_version"] = kVersion;
    meta["config_hash"] = config_hash(argc, argv);
    std::vector<std::string> args(argv + 1, argv + argc);
    meta["argv"] = args;
    return meta;
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw cgp::IoError("cannot create output directory: " + dir.string());
}

struct GridSpec {
    double log_min_frac = 0.01;  // of lambda_max
    int log_count = 30;
    // explicit linear grid, e.g. the fixed 30..300-by-5 style
    std::vector<double> linear;  // [lo, hi, step] when set

    cgp::LambdaGrid build(const cgp::TimeSeries& x, int lags) const {
        if (linear.size() == 3)
            return cgp::LambdaGrid::linear(linear[0], linear[1], linear[2]);
        const double lmax = cgp::lambda_max(x, lags);
        if (!(lmax > 0.0)) throw cgp::DataError("series has no signal; cannot build a grid");
        return cgp::LambdaGrid::logarithmic(log_min_frac * lmax, lmax, log_count);
    }
};

cgp::SelectionMode parse_mode(const std::string& rule) {
    if (rule == "err-pair") return cgp::SelectionMode::err_pair;
    if (rule == "err-pair-bic") return cgp::SelectionMode::err_pair_plus_bic;
    throw cgp::DataError("unknown selection rule: " + rule);
}

int run(int argc, char** argv) {
    CLI::App app{"Causal graph process structure learning (CCD with automatic "
                 "LASSO-coefficient selection)"};
    app.require_subcommand(1);

    // ---- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Generate a CGP-SBM instance");
    struct {
        std::int64_t n = 100;
        int clusters = 5;
        int lags = 3;
        std::int64_t k = 1040;
        std::uint64_t seed = 0;
        double density = 0.021;
        double spectral_target = 0.5;
        double decay = 0.5;
        double sigma = 0.01;
        std::int64_t burn_in = 500;
        std::string out = ".";
    } s;
    sim->add_option("--n", s.n, "Number of nodes");
    sim->add_option("--clusters", s.clusters, "Number of SBM clusters");
    sim->add_option("--lags", s.lags, "Number of time lags M");
    sim->add_option("--k", s.k, "Number of time samples kept after burn-in");
    sim->add_option("--seed", s.seed, "RNG seed")->required();
    sim->add_option("--density", s.density, "Target nonzero fraction of N^2");
    sim->add_option("--spectral-target", s.spectral_target, "Spectral radius after rescaling");
    sim->add_option("--decay", s.decay, "Per-lag decay of sampled polynomial coefficients");
    sim->add_option("--sigma", s.sigma, "Gaussian noise standard deviation");
    sim->add_option("--burn-in", s.burn_in, "Discarded warm-up samples");
    sim->add_option("--out", s.out, "Output directory");

    // ---- shared solver options --------------------------------------------
    cgp::SolverOptions sopts;
    const auto add_solver_flags = [&sopts](CLI::App* cmd) {
        cmd->add_option("--lambda1c", sopts.lambda1_c, "L1 weight on polynomial coefficients");
        cmd->add_option("--lambda2c", sopts.lambda2_c, "L2 weight on polynomial coefficients");
        cmd->add_option("--max-iterations", sopts.max_iterations, "CCD sweep cap");
        cmd->add_option("--epsilon", sopts.epsilon, "Convergence threshold");
    };

    // ---- fit ---------------------------------------------------------------
    auto* fit_cmd = app.add_subcommand("fit", "Fit a CGP at a fixed lambda1");
    struct {
        std::string input;
        int lags = 3;
        double lambda1 = 0.0;
        std::string out = ".";
    } f;
    fit_cmd->add_option("--input", f.input, "Series CSV (header + one row per step)")->required();
    fit_cmd->add_option("--lags", f.lags, "Number of time lags M");
    fit_cmd->add_option("--lambda1", f.lambda1, "LASSO weight on adjacency columns")->required();
    fit_cmd->add_option("--out", f.out, "Output directory");
    add_solver_flags(fit_cmd);

    // ---- select ------------------------------------------------------------
    auto* sel_cmd = app.add_subcommand("select", "Sweep a lambda grid and auto-select lambda1");
    struct {
        std::string input;
        int lags = 3;
        std::string rule = "err-pair";
        GridSpec grid;
        bool emit_plot_data = false;
        std::string out = ".";
    } g;
    sel_cmd->add_option("--input", g.input, "Series CSV")->required();
    sel_cmd->add_option("--lags", g.lags, "Number of time lags M");
    sel_cmd->add_option("--rule", g.rule, "Selection rule: err-pair | err-pair-bic");
    sel_cmd->add_option("--grid-min-frac", g.grid.log_min_frac,
                        "Low end of the log grid as a fraction of lambda_max");
    sel_cmd->add_option("--grid-count", g.grid.log_count, "Number of log-grid points");
    sel_cmd->add_option("--grid-linear", g.grid.linear,
                        "Explicit linear grid: LO HI STEP")->expected(3);
    sel_cmd->add_flag("--emit-plot-data", g.emit_plot_data,
                      "Write the per-lambda metric curves as CSV");
    sel_cmd->add_option("--out", g.out, "Output directory");
    add_solver_flags(sel_cmd);

    // ---- benchmark ---------------------------------------------------------
    auto* bench = app.add_subcommand("benchmark", "Multi-seed recovery benchmark on CGP-SBM");
    struct {
        std::int64_t n = 100;
        int clusters = 5;
        int lags = 3;
        int fit_lags = 0;
        std::int64_t k = 1040;
        int samples = 10;
        std::uint64_t seed = 0;
        std::string rule = "err-pair";
        double density = 0.021;
        double sigma = 0.01;
        std::string out = ".";
    } b;
    bench->add_option("--n", b.n, "Number of nodes");
    bench->add_option("--clusters", b.clusters, "Number of SBM clusters");
    bench->add_option("--lags", b.lags, "Simulation lags M");
    bench->add_option("--fit-lags", b.fit_lags, "Fit lags (0 = same as --lags)");
    bench->add_option("--k", b.k, "Number of time samples");
    bench->add_option("--samples", b.samples, "Number of seeds");
    bench->add_option("--seed", b.seed, "Base RNG seed")->required();
    bench->add_option("--rule", b.rule, "Selection rule");
    bench->add_option("--density", b.density, "Target adjacency density");
    bench->add_option("--sigma", b.sigma, "Noise standard deviation");
    bench->add_option("--out", b.out, "Output directory");
    add_solver_flags(bench);

    // ---- rolling -----------------------------------------------------------
    auto* roll = app.add_subcommand("rolling", "Rolling-window sparsity analysis");
    struct {
        std::string input;
        std::string transform = "none";
        int lags = 5;
        cgp::PriceOptions popts;
        std::string rule = "err-pair";
        std::string out = ".";
    } r;
    roll->add_option("--input", r.input, "Price or return CSV")->required();
    roll->add_option("--transform", r.transform, "none | log-return");
    roll->add_option("--lags", r.lags, "Number of time lags M");
    roll->add_option("--window", r.popts.window, "Rolling window length in samples");
    roll->add_option("--step", r.popts.step, "Samples between window starts");
    roll->add_option("--rv-decay", r.popts.rv_decay, "Realized-variance decay coefficient");
    roll->add_option("--rv-window", r.popts.rv_window, "Realized-variance window in samples");
    roll->add_option("--rule", r.rule, "Selection rule");
    roll->add_option("--out", r.out, "Output directory");
    add_solver_flags(roll);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    cgp::Json meta = base_metadata(argc, argv);

    if (sim->parsed()) {
        ensure_out_dir(s.out);
        cgp::SbmParams params;
        params.n_nodes = s.n;
        params.n_clusters = s.clusters;
        params.target_density = s.density;
        params.spectral_target = s.spectral_target;
        params.seed = s.seed;
        cgp::CgpInstance inst =
            cgp::generate_instance(params, s.lags, s.k, s.sigma, s.decay, s.burn_in);
        const fs::path out(s.out);
        cgp::save_timeseries_csv(out / "series.csv", inst.X);
        cgp::save_adjacency_triplets(out / "adjacency_true.csv", inst.A_true);
        cgp::save_poly_coeffs_csv(out / "coeffs_true.csv", inst.C_true);
        meta["mode"] = "simulate";
        meta["seed"] = s.seed;
        meta["n_nodes"] = s.n;
        meta["n_clusters"] = s.clusters;
        meta["n_lags"] = s.lags;
        meta["k_samples"] = s.k;
        meta["burn_in"] = s.burn_in;
        meta["sigma"] = s.sigma;
        meta["decay"] = s.decay;
        meta["spectral_target"] = s.spectral_target;
        meta["target_density"] = s.density;
        meta["realized_density"] = inst.density;
        cgp::save_metadata(out / "meta.json", meta);
        std::cout << "wrote instance to " << out.string() << " (density "
                  << inst.density * 100.0 << "%)\n";
        return 0;
    }

    if (fit_cmd->parsed()) {
        ensure_out_dir(f.out);
        cgp::LoadedSeries data = cgp::load_csv(f.input);
        cgp::SolverOptions o = sopts;
        o.lambda1 = f.lambda1;
        cgp::FitResult result = cgp::fit(data.series, f.lags, o);
        const fs::path out(f.out);
        cgp::save_adjacency_triplets(out / "adjacency.csv", result.A);
        cgp::save_poly_coeffs_csv(out / "coeffs.csv", result.C);
        meta["mode"] = "fit";
        meta["input"] = f.input;
        meta["n_nodes"] = data.series.n_nodes();
        meta["k_samples"] = data.series.n_samples();
        meta["n_lags"] = f.lags;
        meta["lambda1"] = f.lambda1;
        meta["n_sweeps"] = result.n_sweeps;
        meta["stop_reason"] = cgp::to_string(result.stop_reason);
        meta["ridge_lambda2"] = result.ridge_used;
        meta["edge_count"] = result.A.edge_count();
        cgp::save_metadata(out / "meta.json", meta);
        std::cout << "fit: " << result.A.edge_count() << " edges, stop="
                  << cgp::to_string(result.stop_reason) << "\n";
        return 0;
    }

    if (sel_cmd->parsed()) {
        ensure_out_dir(g.out);
        cgp::LoadedSeries data = cgp::load_csv(g.input);
        const cgp::LambdaGrid grid = g.grid.build(data.series, g.lags);
        cgp::SelectionCurve curve = cgp::sweep(data.series, g.lags, grid, sopts);
        const fs::path out(g.out);
        if (g.emit_plot_data) cgp::save_curve_csv(out / "curve.csv", curve);
        cgp::Selection sel = cgp::select_lambda(curve, parse_mode(g.rule));
        cgp::SolverOptions o = sopts;
        o.lambda1 = sel.lambda1;
        cgp::FitResult result = cgp::fit(data.series, g.lags, o);
        cgp::save_adjacency_triplets(out / "adjacency.csv", result.A);
        cgp::save_poly_coeffs_csv(out / "coeffs.csv", result.C);
        meta["mode"] = "select";
        meta["input"] = g.input;
        meta["n_nodes"] = data.series.n_nodes();
        meta["n_lags"] = g.lags;
        meta["rule"] = g.rule;
        meta["selected_lambda1"] = sel.lambda1;
        meta["selection"] = sel.describe();
        meta["edge_count"] = result.A.edge_count();
        meta["stop_reason"] = cgp::to_string(result.stop_reason);
        cgp::save_metadata(out / "meta.json", meta);
        std::cout << "selected " << sel.describe() << ", " << result.A.edge_count()
                  << " edges\n";
        return 0;
    }

    if (bench->parsed()) {
        ensure_out_dir(b.out);
        cgp::BenchmarkEnv env{b.n, b.clusters, b.lags, b.k, b.fit_lags};
        cgp::BenchmarkOptions bo;
        bo.solver = sopts;
        bo.mode = parse_mode(b.rule);
        bo.noise_sigma = b.sigma;
        bo.target_density = b.density;
        bo.base_seed = b.seed;
        cgp::BenchmarkResult result = cgp::run_benchmark(env, b.samples, bo);
        const fs::path out(b.out);
        cgp::save_benchmark_csv(out / "benchmark.csv", result);
        meta["mode"] = "benchmark";
        meta["seed"] = b.seed;
        meta["samples"] = b.samples;
        meta["median_nbde_pct"] = result.median.nbde_pct;
        meta["median_tp_pct"] = result.median.true_positive_pct;
        meta["median_fp_pct"] = result.median.false_positive_pct;
        meta["iqr_nbde_pct"] = result.iqr.nbde_pct;
        meta["iqr_tp_pct"] = result.iqr.true_positive_pct;
        meta["iqr_fp_pct"] = result.iqr.false_positive_pct;
        meta["dispersion_statistic"] = "interquartile range";
        cgp::save_metadata(out / "meta.json", meta);
        std::cout << "median NBDE% " << result.median.nbde_pct << ", TP% "
                  << result.median.true_positive_pct << ", FP% "
                  << result.median.false_positive_pct << "\n";
        return 0;
    }

    if (roll->parsed()) {
        ensure_out_dir(r.out);
        cgp::PriceTransform transform;
        if (r.transform == "none")
            transform = cgp::PriceTransform::none;
        else if (r.transform == "log-return")
            transform = cgp::PriceTransform::log_return;
        else
            throw cgp::DataError("unknown transform: " + r.transform);
        cgp::LoadedSeries data = cgp::load_csv(r.input, transform);
        const auto rows =
            cgp::rolling_analysis(data.series, r.popts, r.lags, sopts, parse_mode(r.rule));
        const fs::path out(r.out);
        cgp::save_rolling_csv(out / "rolling.csv", rows);
        meta["mode"] = "rolling";
        meta["input"] = r.input;
        meta["transform"] = r.transform;
        meta["n_windows"] = rows.size();
        cgp::save_metadata(out / "meta.json", meta);
        std::cout << "rolling: " << rows.size() << " windows\n";
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cgp::Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 1;
    }
}
