#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "clwe/embedding.hpp"
#include "clwe/error.hpp"
#include "clwe/modularity.hpp"
#include "clwe/numeric.hpp"

namespace clwe {

// Fractional ranks, 1-based; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t p = i; p <= j; ++p) ranks[order[p]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw InputError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    if (x.size() < 3) throw InputError("pearson: need at least 3 observations");
    std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DegenerateError("pearson: constant input, correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

// Pearson correlation of the rank vectors; ties get average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw InputError("spearman: length mismatch (" + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    if (x.size() < 3) throw InputError("spearman: need at least 3 observations");
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    return pearson(rx, ry);
}

struct FeatureTable {
    std::vector<std::string> names;            // feature columns
    std::vector<std::vector<double>> columns;  // aligned with names
    std::string target_name;
    std::vector<double> target;

    std::size_t rows() const { return target.size(); }
};

// TSV with a header row; all columns numeric. The named target column is
// split out, every other column becomes a feature.
inline FeatureTable load_feature_table(const std::string& path, const std::string& target) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    detail::strip_cr(line);
    auto header = detail::split_ws(line);
    if (header.size() < 2) throw InputError(path + ": need at least 2 columns");
    std::optional<std::size_t> target_col;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == target) target_col = c;
    if (!target_col) throw InputError(path + ": target column '" + target + "' not found");

    FeatureTable table;
    table.target_name = target;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != *target_col) table.names.emplace_back(header[c]);
    table.columns.resize(table.names.size());

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != header.size())
            throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " columns, got " +
                             std::to_string(toks.size()));
        std::size_t f = 0;
        for (std::size_t c = 0; c < toks.size(); ++c) {
            double v = detail::parse_double(toks[c], line_no, path);
            if (c == *target_col)
                table.target.push_back(v);
            else
                table.columns[f++].push_back(v);
        }
    }
    if (table.rows() < 3) throw InputError(path + ": need at least 3 observations");
    return table;
}

struct RegressionResult {
    std::vector<std::string> names;  // features actually used
    std::vector<double> coefficients;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// OLS of the raw target on z-scored features (population sd) with an
// intercept. Exactly collinear designs resolve to the minimum-norm solution,
// so ablating a duplicated feature cannot change the fit.
inline RegressionResult ablation_regression(const FeatureTable& table,
                                            const std::optional<std::string>& ablate = {}) {
    std::vector<std::size_t> used;
    for (std::size_t c = 0; c < table.names.size(); ++c) {
        if (ablate && table.names[c] == *ablate) continue;
        used.push_back(c);
    }
    if (ablate && used.size() == table.names.size())
        throw InputError("ablation_regression: no column named '" + *ablate + "'");
    if (used.empty()) throw InputError("ablation_regression: no feature columns left");
    std::size_t n = table.rows();
    if (n < used.size() + 1)
        throw InputError("ablation_regression: need at least " + std::to_string(used.size() + 1) +
                         " rows for " + std::to_string(used.size()) + " features");
    for (std::size_t c : used)
        if (table.columns[c].size() != n)
            throw InputError("ablation_regression: ragged table");

    Eigen::MatrixXd design(n, used.size() + 1);
    RegressionResult res;
    for (std::size_t i = 0; i < n; ++i) design(i, 0) = 1.0;
    for (std::size_t f = 0; f < used.size(); ++f) {
        const auto& col = table.columns[used[f]];
        res.names.push_back(table.names[used[f]]);
        double mean = 0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(n);
        double var = 0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        if (var == 0.0)
            throw DegenerateError("ablation_regression: zero-variance feature column '" +
                                  table.names[used[f]] + "'");
        double sd = std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i) design(i, f + 1) = (col[i] - mean) / sd;
    }

    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) y(i) = table.target[i];
    Eigen::VectorXd beta = design.completeOrthogonalDecomposition().solve(y);

    double y_mean = y.mean();
    double ss_tot = (y.array() - y_mean).square().sum();
    if (ss_tot == 0.0)
        throw DegenerateError("ablation_regression: constant target, R^2 undefined");
    double ss_res = (y - design * beta).squaredNorm();
    res.intercept = beta(0);
    for (std::size_t f = 0; f < used.size(); ++f) res.coefficients.push_back(beta(f + 1));
    res.r_squared = 1.0 - ss_res / ss_tot;
    return res;
}

struct SweepCell {
    std::size_t k = 0;
    std::size_t t = 0;
    bool ok = false;
    double pearson_r = 0.0;
    double spearman_rho = 0.0;
    std::string note;  // why the cell is missing
};

struct SweepOptions {
    KnnBackend backend = KnnBackend::forest;
    std::size_t leaf_capacity = 32;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::size_t limit = 0;  // per-language frequency cutoff for the graphs
};

// For every (k, t), scores each embedding space by Q_norm and correlates
// those scores with the aligned target scores. Cells whose correlation is
// undefined (constant modularity) are recorded as missing and the sweep
// continues; graph/modularity failures abort with the cell attached.
inline std::vector<SweepCell> sweep(const std::vector<EmbeddingSpace>& spaces,
                                    const std::vector<std::size_t>& ks,
                                    const std::vector<std::size_t>& ts,
                                    std::span<const double> scores, const SweepOptions& opts) {
    if (spaces.size() != scores.size())
        throw InputError("sweep: " + std::to_string(spaces.size()) + " spaces but " +
                         std::to_string(scores.size()) + " scores");
    if (spaces.size() < 3) throw InputError("sweep: need at least 3 embedding spaces");
    if (ks.empty() || ts.empty()) throw InputError("sweep: empty grid");

    std::vector<SweepCell> cells;
    for (std::size_t k : ks) {
        for (std::size_t t : ts) {
            SweepCell cell;
            cell.k = k;
            cell.t = t;
            std::vector<double> mods;
            for (std::size_t e = 0; e < spaces.size(); ++e) {
                GraphConfig cfg;
                cfg.k = k;
                cfg.backend = opts.backend;
                cfg.trees = t;
                cfg.leaf_capacity = opts.leaf_capacity;
                cfg.seed = opts.seed;
                cfg.threads = opts.threads;
                try {
                    mods.push_back(modularity_from_space(spaces[e], cfg, opts.limit).q_norm);
                } catch (const Error& err) {
                    std::string ctx = "sweep cell (k=" + std::to_string(k) +
                                      ", t=" + std::to_string(t) + "), embedding " +
                                      std::to_string(e) + ": " + err.what();
                    if (err.kind() == Error::Kind::input) throw InputError(ctx);
                    throw DegenerateError(ctx);
                }
            }
            try {
                cell.pearson_r = pearson(mods, scores);
                cell.spearman_rho = spearman(mods, scores);
                cell.ok = true;
            } catch (const DegenerateError& err) {
                cell.note = err.what();
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

inline void write_sweep_tsv(const std::vector<SweepCell>& cells, std::ostream& out) {
    out << "k\tt\tpearson\tspearman\n";
    for (const auto& c : cells) {
        out << c.k << '\t' << c.t << '\t';
        if (c.ok)
            out << format6(c.pearson_r) << '\t' << format6(c.spearman_rho);
        else
            out << "nan\tnan";
        out << '\n';
    }
}

inline void write_regression_tsv(const RegressionResult& res, std::ostream& out) {
    out << "term\tvalue\n";
    out << "intercept\t" << format6(res.intercept) << '\n';
    for (std::size_t f = 0; f < res.names.size(); ++f)
        out << res.names[f] << '\t' << format6(res.coefficients[f]) << '\n';
    out << "r_squared\t" << format6(res.r_squared) << '\n';
}

}  // namespace clwe
