#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Errors carry a short machine-parsable category used by the CLI exit path.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("data", what) {}
};

class InstabilityError : public Error {
public:
    explicit InstabilityError(const std::string& what) : Error("instability", what) {}
};

class SelectionError : public Error {
public:
    explicit SelectionError(const std::string& what) : Error("selection", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

// Node signals over time, one column per time step.
struct TimeSeries {
    Matrix values;  // N x K

    TimeSeries() = default;
    explicit TimeSeries(Matrix v) : values(std::move(v)) {
        if (!values.allFinite())
            throw DataError("time series contains non-finite entries");
    }

    Eigen::Index n_nodes() const { return values.rows(); }
    Eigen::Index n_samples() const { return values.cols(); }
};

// Directed, signed weights. Entry (i, j) is the weight of the edge j -> i,
// so column j holds the out-edges of node j. Exact zeros mean "no edge".
struct AdjacencyMatrix {
    Matrix weights;

    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(Matrix w) : weights(std::move(w)) {
        if (weights.rows() != weights.cols())
            throw DimensionError("adjacency matrix must be square");
        if (!weights.allFinite())
            throw DataError("adjacency matrix contains non-finite entries");
    }

    Eigen::Index n_nodes() const { return weights.rows(); }

    Eigen::Index edge_count() const {
        return (weights.array() != 0.0).count();
    }
};

// Per-lag coefficient matrices R_1..R_M, unconstrained stand-ins for the
// graph filters during the first block-descent stage.
struct LagCoefficients {
    std::vector<Matrix> mats;

    LagCoefficients() = default;
    explicit LagCoefficients(std::vector<Matrix> m) : mats(std::move(m)) {
        if (mats.empty()) throw DimensionError("need at least one lag matrix");
        const Eigen::Index n = mats.front().rows();
        for (const Matrix& r : mats) {
            if (r.rows() != n || r.cols() != n)
                throw DimensionError("lag matrices must share dimension NxN");
            if (!r.allFinite())
                throw DataError("lag matrix contains non-finite entries");
        }
    }

    static LagCoefficients zeros(Eigen::Index n, int n_lags) {
        return LagCoefficients(std::vector<Matrix>(
            static_cast<std::size_t>(n_lags), Matrix::Zero(n, n)));
    }

    int n_lags() const { return static_cast<int>(mats.size()); }
    Eigen::Index n_nodes() const { return mats.front().rows(); }
};

// Triangular table c_{l,j}, l = 1..M, j = 0..l. The first-lag pair is pinned
// to (0, 1) so the lag-1 filter is the adjacency matrix itself.
struct PolyCoefficients {
    std::vector<std::vector<double>> c;  // c[l-1] has l+1 entries

    explicit PolyCoefficients(int n_lags = 1) {
        if (n_lags < 1) throw DimensionError("need at least one lag");
        c.resize(static_cast<std::size_t>(n_lags));
        for (int l = 1; l <= n_lags; ++l)
            c[static_cast<std::size_t>(l - 1)].assign(static_cast<std::size_t>(l) + 1, 0.0);
        c[0][1] = 1.0;
    }

    int n_lags() const { return static_cast<int>(c.size()); }

    double at(int l, int j) const { return c.at(static_cast<std::size_t>(l - 1)).at(static_cast<std::size_t>(j)); }

    void set(int l, int j, double v) {
        if (l == 1)
            throw DataError("first-lag coefficients are fixed to (0, 1)");
        c.at(static_cast<std::size_t>(l - 1)).at(static_cast<std::size_t>(j)) = v;
    }
};

struct NoiseSpec {
    double sigma = 0.01;
    std::uint64_t seed = 0;

    NoiseSpec() = default;
    NoiseSpec(double s, std::uint64_t sd) : sigma(s), seed(sd) {
        if (sigma < 0.0) throw DataError("noise sigma must be nonnegative");
    }
};

}  // namespace cgp
