#pragma once

#include <Eigen/Eigenvalues>
#include <random>

#include "cgp/model.hpp"
#include "cgp/types.hpp"

namespace cgp {

struct SbmParams {
    Eigen::Index n_nodes = 100;
    int n_clusters = 5;
    // NaN means derive (p_in, p_out) from target_density and in_out_ratio.
    double p_in = std::numeric_limits<double>::quiet_NaN();
    double p_out = std::numeric_limits<double>::quiet_NaN();
    double target_density = 0.021;  // requested nonzero fraction of N^2
    double in_out_ratio = 5.0;      // p_in / p_out when deriving
    double weight_low = 0.3;
    double weight_high = 0.7;
    double sign_prob = 0.5;
    double spectral_target = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_nodes < 1 || n_clusters < 1 || n_clusters > n_nodes)
            throw DataError("sbm: invalid node/cluster counts");
        if (!std::isnan(p_in) || !std::isnan(p_out)) {
            if (!(p_in >= 0.0) || p_in > 1.0 || !(p_out >= 0.0) || p_out > p_in)
                throw DataError("sbm: need 0 <= p_out <= p_in <= 1");
        } else if (!(target_density > 0.0 && target_density < 1.0) || in_out_ratio < 1.0) {
            throw DataError("sbm: invalid density/ratio parameters");
        }
        if (!(spectral_target > 0.0 && spectral_target < 1.0))
            throw DataError("sbm: spectral_target must lie in (0, 1)");
        if (weight_high < weight_low || weight_low < 0.0)
            throw DataError("sbm: invalid weight range");
        if (sign_prob < 0.0 || sign_prob > 1.0)
            throw DataError("sbm: sign_prob must lie in [0, 1]");
    }
};

namespace detail {

inline std::vector<int> cluster_assignment(Eigen::Index n, int n_clusters) {
    std::vector<int> cluster(static_cast<std::size_t>(n));
    // near-equal contiguous blocks
    for (Eigen::Index i = 0; i < n; ++i)
        cluster[static_cast<std::size_t>(i)] =
            static_cast<int>((i * n_clusters) / n);
    return cluster;
}

inline double spectral_radius(const Matrix& a) {
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Ordered intra-/inter-cluster pair counts (no self-pairs).
inline std::pair<double, double> pair_counts(Eigen::Index n, int n_clusters) {
    const auto cluster = cluster_assignment(n, n_clusters);
    std::vector<double> sizes(static_cast<std::size_t>(n_clusters), 0.0);
    for (int c : cluster) sizes[static_cast<std::size_t>(c)] += 1.0;
    double intra = 0.0;
    for (double s : sizes) intra += s * (s - 1.0);
    const double total = static_cast<double>(n) * (static_cast<double>(n) - 1.0);
    return {intra, total - intra};
}

inline std::pair<double, double> edge_probabilities(const SbmParams& p) {
    if (!std::isnan(p.p_in) || !std::isnan(p.p_out)) return {p.p_in, p.p_out};
    const auto [intra, inter] = pair_counts(p.n_nodes, p.n_clusters);
    const double wanted = p.target_density * static_cast<double>(p.n_nodes) *
                          static_cast<double>(p.n_nodes);
    const double p_out = wanted / (p.in_out_ratio * intra + inter);
    return {std::min(1.0, p.in_out_ratio * p_out), std::min(1.0, p_out)};
}

}  // namespace detail

// Directed SBM draw: intra-cluster pairs connect with p_in, inter-cluster
// with p_out, uniform signed weight magnitudes, no self-loops, then a global
// rescale pinning the spectral radius to spectral_target.
inline AdjacencyMatrix sample_adjacency(const SbmParams& params) {
    params.validate();
    const Eigen::Index n = params.n_nodes;
    const auto cluster = detail::cluster_assignment(n, params.n_clusters);
    const auto [p_in, p_out] = detail::edge_probabilities(params);

    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> magnitude(params.weight_low, params.weight_high);

    for (int attempt = 0; attempt < 10; ++attempt) {
        Matrix a = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const bool same = cluster[static_cast<std::size_t>(i)] ==
                                  cluster[static_cast<std::size_t>(j)];
                if (unit(rng) >= (same ? p_in : p_out)) continue;
                double w = magnitude(rng);
                if (unit(rng) < params.sign_prob) w = -w;
                a(i, j) = w;
            }
        if ((a.array() != 0.0).count() == 0) continue;
        const double rho = detail::spectral_radius(a);
        // (near-)nilpotent draws cannot be pinned to the target radius without
        // exploding the weights and the simulation transient
        if (!(rho > 1e-6)) continue;
        a *= params.spectral_target / rho;
        if (a.norm() > 1e3) continue;
        return AdjacencyMatrix(std::move(a));
    }
    throw DataError("sample_adjacency: drew an unusable (empty or near-nilpotent) graph 10 times");
}

// Free coefficients ~ Uniform[-1, 1] scaled by decay^{l-1}, then globally
// rescaled so that sum_{l>=2} sum_j |c_{l,j}| rho^j <= 0.9 (1 - rho), a
// sufficient stability budget for a process with spectral radius rho.
inline PolyCoefficients sample_poly_coeffs(int n_lags, double decay, std::uint64_t seed,
                                           double spectral_target = 0.5) {
    if (n_lags < 1) throw DataError("sample_poly_coeffs: need at least one lag");
    if (!(decay > 0.0 && decay < 1.0) && decay != 0.0)
        throw DataError("sample_poly_coeffs: decay must lie in [0, 1)");
    PolyCoefficients c(n_lags);
    if (n_lags == 1) return c;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double weighted_sum = 0.0;
    double scale = decay;
    for (int l = 2; l <= n_lags; ++l, scale *= decay) {
        for (int j = 0; j <= l; ++j) {
            const double v = unif(rng) * scale;
            c.set(l, j, v);
            weighted_sum += std::abs(v) * std::pow(spectral_target, j);
        }
    }
    const double budget = 0.9 * (1.0 - spectral_target);
    if (weighted_sum > budget && weighted_sum > 0.0) {
        const double shrink = budget / weighted_sum;
        for (int l = 2; l <= n_lags; ++l)
            for (int j = 0; j <= l; ++j) c.set(l, j, c.at(l, j) * shrink);
    }
    return c;
}

struct CgpInstance {
    AdjacencyMatrix A_true;
    PolyCoefficients C_true;
    TimeSeries X;
    SbmParams params;
    int n_lags = 1;
    Eigen::Index k_samples = 0;
    double density = 0.0;  // realized nonzero fraction of N^2
};

// Composes graph, coefficients, and simulation with the standard burn-in.
// Sub-streams are derived from the instance seed, so a seed fully
// determines the instance.
inline CgpInstance generate_instance(const SbmParams& params, int n_lags, Eigen::Index k_samples,
                                     double noise_sigma = 0.01, double decay = 0.5,
                                     Eigen::Index burn_in = 500) {
    SbmParams p = params;
    AdjacencyMatrix a = sample_adjacency(p);
    PolyCoefficients c =
        sample_poly_coeffs(n_lags, decay, p.seed + 0x9e3779b97f4a7c15ULL, p.spectral_target);
    TimeSeries x;
    try {
        x = simulate(a, c, k_samples, burn_in, NoiseSpec(noise_sigma, p.seed + 0x5851f42d4c957f2dULL));
    } catch (const InstabilityError& e) {
        throw InstabilityError(std::string(e.what()) + " (seed " + std::to_string(p.seed) + ")");
    }
    CgpInstance inst{std::move(a), std::move(c), std::move(x), p, n_lags, k_samples, 0.0};
    inst.density = static_cast<double>(inst.A_true.edge_count()) /
                   (static_cast<double>(p.n_nodes) * static_cast<double>(p.n_nodes));
    return inst;
}

}  // namespace cgp
