#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "cgp/evaluate.hpp"
#include "cgp/select.hpp"

namespace cgp {

using Json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Write-then-rename so readers never observe a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path.string() + " (" + ec.message() + ")");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace detail

enum class PriceTransform { none, log_return };

struct LoadedSeries {
    TimeSeries series;
    std::vector<std::string> labels;
};

// CSV layout: header row of node labels, then one row per time step. The
// in-memory series is node-major (N x K). With the log-return transform the
// sample count shrinks by one.
inline LoadedSeries load_csv(const std::filesystem::path& path,
                             PriceTransform transform = PriceTransform::none) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    LoadedSeries out;
    out.labels = detail::split_csv_line(line);
    const std::size_t n = out.labels.size();
    if (n == 0) throw DataError("CSV has no columns: " + path.string());

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != n)
            throw DataError("ragged CSV row " + std::to_string(line_no) + ": expected " +
                            std::to_string(n) + " cells, got " + std::to_string(cells.size()));
        std::vector<double> vals(n);
        for (std::size_t c = 0; c < n; ++c) {
            try {
                std::size_t consumed = 0;
                vals[c] = std::stod(cells[c], &consumed);
                if (consumed != cells[c].size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw DataError("non-numeric cell at row " + std::to_string(line_no) +
                                ", column " + std::to_string(c + 1));
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw DataError("CSV has no data rows: " + path.string());

    Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t i = 0; i < n; ++i)
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[k][i];

    if (transform == PriceTransform::log_return) {
        if (values.cols() < 2) throw DataError("log_return needs at least two rows");
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            for (Eigen::Index k = 0; k < values.cols(); ++k)
                if (!(values(i, k) > 0.0))
                    throw DataError("non-positive price at row " + std::to_string(k + 2) +
                                    ", column " + std::to_string(i + 1));
        Matrix ret(values.rows(), values.cols() - 1);
        for (Eigen::Index k = 1; k < values.cols(); ++k)
            ret.col(k - 1) = (values.col(k).array() / values.col(k - 1).array()).log();
        values = std::move(ret);
    }
    out.series = TimeSeries(std::move(values));
    return out;
}

inline void save_timeseries_csv(const std::filesystem::path& path, const TimeSeries& x,
                                const std::vector<std::string>& labels = {}) {
    std::string body;
    const Eigen::Index n = x.n_nodes();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i) body += ',';
        body += (static_cast<std::size_t>(i) < labels.size())
                    ? labels[static_cast<std::size_t>(i)]
                    : "node" + std::to_string(i);
    }
    body += '\n';
    for (Eigen::Index k = 0; k < x.n_samples(); ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i) body += ',';
            body += detail::format_double(x.values(i, k));
        }
        body += '\n';
    }
    detail::write_atomic(path, body);
}

// Sparse triplet layout: one line per nonzero, "row,col,weight".
inline void save_adjacency_triplets(const std::filesystem::path& path, const AdjacencyMatrix& a) {
    std::string body = "row,col,weight\n";
    for (Eigen::Index j = 0; j < a.n_nodes(); ++j)
        for (Eigen::Index i = 0; i < a.n_nodes(); ++i)
            if (a.weights(i, j) != 0.0)
                body += std::to_string(i) + ',' + std::to_string(j) + ',' +
                        detail::format_double(a.weights(i, j)) + '\n';
    detail::write_atomic(path, body);
}

inline AdjacencyMatrix load_adjacency_triplets(const std::filesystem::path& path,
                                               Eigen::Index n_nodes) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty triplet file: " + path.string());
    Matrix a = Matrix::Zero(n_nodes, n_nodes);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 3)
            throw DataError("bad triplet at line " + std::to_string(line_no));
        const auto i = static_cast<Eigen::Index>(std::stol(cells[0]));
        const auto j = static_cast<Eigen::Index>(std::stol(cells[1]));
        if (i < 0 || i >= n_nodes || j < 0 || j >= n_nodes)
            throw DataError("triplet index out of range at line " + std::to_string(line_no));
        a(i, j) = std::stod(cells[2]);
    }
    return AdjacencyMatrix(std::move(a));
}

inline void save_poly_coeffs_csv(const std::filesystem::path& path, const PolyCoefficients& c) {
    std::string body = "lag,power,coefficient\n";
    for (int l = 1; l <= c.n_lags(); ++l)
        for (int j = 0; j <= l; ++j)
            body += std::to_string(l) + ',' + std::to_string(j) + ',' +
                    detail::format_double(c.at(l, j)) + '\n';
    detail::write_atomic(path, body);
}

inline PolyCoefficients load_poly_coeffs_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<std::tuple<int, int, double>> entries;
    int max_lag = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 3) throw DataError("bad coefficient row in " + path.string());
        entries.emplace_back(std::stoi(cells[0]), std::stoi(cells[1]), std::stod(cells[2]));
        max_lag = std::max(max_lag, std::get<0>(entries.back()));
    }
    PolyCoefficients c(max_lag);
    for (const auto& [l, j, v] : entries)
        if (l > 1) c.set(l, j, v);
    return c;
}

inline void save_curve_csv(const std::filesystem::path& path, const SelectionCurve& curve) {
    const auto cell = [](const std::optional<double>& v) {
        return v ? detail::format_double(*v) : std::string();
    };
    std::string body = "lambda1,edge_count,err,err_d,aic,bic,mse_in,mse_out\n";
    for (const CurveRow& row : curve.rows) {
        body += detail::format_double(row.lambda1) + ',';
        body += row.ok ? std::to_string(row.edge_count) : std::string();
        body += ',' + cell(row.err) + ',' + cell(row.err_d) + ',' + cell(row.aic) + ',' +
                cell(row.bic) + ',' + cell(row.mse_in) + ',' + cell(row.mse_out) + '\n';
    }
    detail::write_atomic(path, body);
}

inline void save_benchmark_csv(const std::filesystem::path& path, const BenchmarkResult& result) {
    std::string body = "seed,ok,lambda1,true_density,nbde,nbde_pct,tp_pct,fp_pct,adjacency_mse,error\n";
    for (const BenchmarkRow& row : result.rows) {
        body += std::to_string(row.seed) + ',' + (row.ok ? "1" : "0") + ',';
        if (row.ok) {
            body += detail::format_double(row.lambda1) + ',' +
                    detail::format_double(row.true_density) + ',' +
                    std::to_string(row.report.nbde) + ',' +
                    detail::format_double(row.report.nbde_pct) + ',' +
                    detail::format_double(row.report.true_positive_pct) + ',' +
                    detail::format_double(row.report.false_positive_pct) + ',' +
                    detail::format_double(row.report.adjacency_mse) + ',';
        } else {
            body += ",,,,,,," + row.error;
        }
        body += '\n';
    }
    detail::write_atomic(path, body);
}

inline void save_metadata(const std::filesystem::path& path, const Json& meta) {
    detail::write_atomic(path, meta.dump(2) + "\n");
}

struct PriceOptions {
    PriceTransform transform = PriceTransform::none;
    Eigen::Index window = 1040;  // samples per rolling fit
    Eigen::Index step = 130;     // samples between window starts
    double rv_decay = 0.99;
    Eigen::Index rv_window = 40;

    void validate() const {
        if (window < 1 || step < 1 || rv_window < 1)
            throw DataError("price options: windows and step must be positive");
        if (!(rv_decay > 0.0 && rv_decay < 1.0))
            throw DataError("price options: rv decay must lie in (0, 1)");
    }
};

struct RealizedVariance {
    Matrix rv;             // N x K, NaN where the window is incomplete
    Vector market_log_rv;  // mean over nodes of ln(RV), NaN where undefined
};

// Exponentially weighted windowed mean of squared returns, weights
// proportional to decay^t and normalized to sum one.
inline RealizedVariance realized_variance(const TimeSeries& x, double decay, Eigen::Index window) {
    if (!(decay > 0.0 && decay < 1.0)) throw DataError("realized_variance: decay must be in (0,1)");
    if (window < 1 || window > x.n_samples())
        throw DataError("realized_variance: window must fit inside the series");
    const Eigen::Index n = x.n_nodes();
    const Eigen::Index k = x.n_samples();
    Vector w(window);
    for (Eigen::Index t = 0; t < window; ++t) w[t] = std::pow(decay, static_cast<double>(t));
    w /= w.sum();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    RealizedVariance out;
    out.rv = Matrix::Constant(n, k, nan);
    out.market_log_rv = Vector::Constant(k, nan);
    for (Eigen::Index kk = window - 1; kk < k; ++kk) {
        double log_sum = 0.0;
        bool defined = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double rv = 0.0;
            for (Eigen::Index t = 0; t < window; ++t) {
                const double r = x.values(i, kk - t);
                rv += w[t] * r * r;
            }
            out.rv(i, kk) = rv;
            if (rv > 0.0)
                log_sum += std::log(rv);
            else
                defined = false;
        }
        if (defined) out.market_log_rv[kk] = log_sum / static_cast<double>(n);
    }
    return out;
}

struct RollingRow {
    Eigen::Index start = 0;
    Eigen::Index end = 0;  // exclusive
    bool ok = false;
    std::string error;
    double sparsity_pct = 0.0;  // nonzero edges / N^2 * 100
    double lambda1 = 0.0;
    double market_log_rv = std::numeric_limits<double>::quiet_NaN();
};

// Re-runs the full selection pipeline on each rolling window and tracks the
// resulting sparsity level next to the window-end market log realized
// variance.
inline std::vector<RollingRow> rolling_analysis(const TimeSeries& x, const PriceOptions& popts,
                                                int n_lags, const SolverOptions& sopts,
                                                SelectionMode mode = SelectionMode::err_pair) {
    popts.validate();
    if (x.n_samples() < popts.window)
        throw DataError("rolling_analysis: series shorter than one window");
    std::optional<RealizedVariance> rv;
    if (popts.rv_window <= x.n_samples())
        rv = realized_variance(x, popts.rv_decay, popts.rv_window);

    const double n_sq = static_cast<double>(x.n_nodes()) * static_cast<double>(x.n_nodes());
    std::vector<RollingRow> rows;
    for (Eigen::Index start = 0; start + popts.window <= x.n_samples(); start += popts.step) {
        RollingRow row;
        row.start = start;
        row.end = start + popts.window;
        if (rv) row.market_log_rv = rv->market_log_rv[row.end - 1];
        try {
            const TimeSeries window(x.values.middleCols(start, popts.window));
            auto [a_hat, lambda1] = recover_adjacency(window, n_lags, sopts, mode);
            row.sparsity_pct = 100.0 * static_cast<double>(a_hat.edge_count()) / n_sq;
            row.lambda1 = lambda1;
            row.ok = true;
        } catch (const std::exception& ex) {
            row.error = ex.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void save_rolling_csv(const std::filesystem::path& path,
                             const std::vector<RollingRow>& rows) {
    std::string body = "start,end,ok,sparsity_pct,lambda1,market_log_rv,error\n";
    for (const RollingRow& row : rows) {
        body += std::to_string(row.start) + ',' + std::to_string(row.end) + ',' +
                (row.ok ? "1" : "0") + ',';
        if (row.ok)
            body += detail::format_double(row.sparsity_pct) + ',' +
                    detail::format_double(row.lambda1);
        else
            body += ",";
        body += ',';
        if (std::isfinite(row.market_log_rv)) body += detail::format_double(row.market_log_rv);
        body += ',' + row.error + '\n';
    }
    detail::write_atomic(path, body);
}

}  // namespace cgp
