#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "clwe/csls.hpp"
#include "clwe/embedding.hpp"
#include "clwe/error.hpp"
#include "clwe/mapping_matrix.hpp"
#include "clwe/modularity.hpp"

namespace clwe {

struct FitInfo {
    std::size_t pairs_used = 0;
    std::size_t rank = 0;
    std::vector<std::string> warnings;
};

enum class ValidationMetric { csls10k, mod10k };

inline std::string metric_name(ValidationMetric m) {
    return m == ValidationMetric::csls10k ? "csls10k" : "mod10k";
}

inline ValidationMetric parse_metric(std::string_view name) {
    if (name == "csls10k") return ValidationMetric::csls10k;
    if (name == "mod10k") return ValidationMetric::mod10k;
    throw InputError("unknown validation metric '" + std::string(name) +
                     "' (expected csls10k or mod10k)");
}

// Both metrics are maximized by the selection loop: csls10k is the mean
// top-1 CSLS over the limit most frequent source words, mod10k is the
// negated Q_norm of the joint mapped kNN graph (lower modularity is better,
// so its negation is "higher is better").
struct MetricOptions {
    ValidationMetric metric = ValidationMetric::csls10k;
    std::size_t limit = 10000;
    std::size_t kappa = 10;
    std::size_t graph_k = 3;
    KnnBackend backend = KnnBackend::exact;
    std::size_t trees = 450;
    std::size_t leaf_capacity = 32;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

namespace detail {

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> pair_matrices(const EmbeddingSpace& src,
                                                                 const EmbeddingSpace& tgt,
                                                                 const Lexicon& lex,
                                                                 FitInfo* info) {
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    for (const auto& [s, t] : lex.pairs) {
        auto si = src.find(lex.source_language, s);
        auto ti = tgt.find(lex.target_language, t);
        if (si && ti) rows.emplace_back(*si, *ti);
    }
    if (rows.empty())
        throw DegenerateError("mapping fit: no lexicon pairs found in the vocabularies");
    std::size_t d = src.dim;
    Eigen::MatrixXd x(rows.size(), d), y(rows.size(), d);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) {
            x(r, c) = src.vector(rows[r].first)[c];
            y(r, c) = tgt.vector(rows[r].second)[c];
        }
    if (info) {
        info->pairs_used = rows.size();
        if (rows.size() < d)
            info->warnings.push_back("only " + std::to_string(rows.size()) +
                                     " pairs for dimension " + std::to_string(d));
    }
    return {std::move(x), std::move(y)};
}

inline MappingMatrix from_eigen(const Eigen::MatrixXd& w, bool orthogonal) {
    MappingMatrix m;
    m.dim = static_cast<std::size_t>(w.rows());
    m.orthogonal = orthogonal;
    m.w.resize(m.dim * m.dim);
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t j = 0; j < m.dim; ++j) m.w[i * m.dim + j] = w(i, j);
    return m;
}

}  // namespace detail

// W = argmin ||XW - Y||_F. Rank-deficient systems fall back to the
// minimum-norm solution and are reported through `info`.
inline MappingMatrix fit_mse(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                             const Lexicon& lex, FitInfo* info = nullptr) {
    if (src.dim != tgt.dim) throw InputError("fit_mse: source/target dimension mismatch");
    auto [x, y] = detail::pair_matrices(src, tgt, lex, info);
    auto cod = x.completeOrthogonalDecomposition();
    Eigen::MatrixXd w = cod.solve(y);
    if (info) {
        info->rank = static_cast<std::size_t>(cod.rank());
        if (info->rank < src.dim)
            info->warnings.push_back("rank-deficient system (rank " + std::to_string(info->rank) +
                                     " < " + std::to_string(src.dim) +
                                     "); returning the minimum-norm solution");
    }
    return detail::from_eigen(w, false);
}

// Orthogonal Procrustes: W = U V^T from the SVD X^T Y = U S V^T. Signs from
// the decomposition cancel in the product, so it is used directly.
inline MappingMatrix fit_procrustes(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                    const Lexicon& lex, FitInfo* info = nullptr) {
    if (src.dim != tgt.dim) throw InputError("fit_procrustes: source/target dimension mismatch");
    auto [x, y] = detail::pair_matrices(src, tgt, lex, info);
    Eigen::MatrixXd m = x.transpose() * y;
    if (m.norm() == 0.0)
        throw DegenerateError("fit_procrustes: cross-covariance is zero; mapping undefined");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd w = svd.matrixU() * svd.matrixV().transpose();
    if (info) info->rank = static_cast<std::size_t>(svd.rank());
    return detail::from_eigen(w, true);
}

// Synthetic training dictionary from CSLS retrieval: each source word pairs
// with its CSLS-nearest target; `mutual` keeps only pairs that are nearest
// in both directions. Pairs are ranked by score and truncated to `size`.
inline Lexicon induce_dictionary(const CslsContext& ctx, std::size_t size, bool mutual,
                                 unsigned threads = 0) {
    if (size == 0) throw InputError("induce_dictionary: size must be >= 1");
    std::size_t ns = ctx.src_words.size();
    std::size_t nt = ctx.tgt_words.size();

    std::vector<std::uint32_t> best_tgt(ns);
    std::vector<double> best_score(ns);
    parallel_for(ns, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            auto top = csls_retrieve_by_id(ctx, static_cast<std::uint32_t>(s), 1);
            best_tgt[s] = top[0].id;
            best_score[s] = top[0].similarity;
        }
    });

    std::vector<char> keep(ns, 1);
    if (mutual) {
        std::vector<std::uint32_t> best_src(nt);
        parallel_for(nt, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t t = begin; t < end; ++t) {
                std::uint32_t arg = 0;
                double best = -std::numeric_limits<double>::infinity();
                for (std::uint32_t s = 0; s < ns; ++s) {
                    double score = csls_by_id(ctx, s, static_cast<std::uint32_t>(t));
                    if (score > best) {
                        best = score;
                        arg = s;
                    }
                }
                best_src[t] = arg;
            }
        });
        for (std::size_t s = 0; s < ns; ++s) keep[s] = best_src[best_tgt[s]] == s;
    }

    std::vector<std::uint32_t> order;
    for (std::uint32_t s = 0; s < ns; ++s)
        if (keep[s]) order.push_back(s);
    if (order.empty()) throw DegenerateError("induce_dictionary: no mutual pairs survived");
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (best_score[a] != best_score[b]) return best_score[a] > best_score[b];
        return a < b;
    });
    if (order.size() > size) order.resize(size);

    Lexicon dict;
    dict.source_language = ctx.src_lang;
    dict.target_language = ctx.tgt_lang;
    for (std::uint32_t s : order)
        dict.pairs.emplace_back(ctx.src_words[s], ctx.tgt_words[best_tgt[s]]);
    return dict;
}

// Scores one mapping candidate under the chosen validation metric.
inline double evaluate_metric(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                              const MappingMatrix& w, const MetricOptions& opts) {
    if (opts.metric == ValidationMetric::csls10k) {
        CslsOptions copts;
        copts.kappa = opts.kappa;
        copts.limit = opts.limit;
        copts.seed = opts.seed;
        copts.trees = opts.trees;
        copts.leaf_capacity = opts.leaf_capacity;
        copts.threads = opts.threads;
        auto ctx = build_csls_context(src, tgt, &w, copts);
        return csls_10k(ctx, opts.threads);
    }
    // mod10k: -Q_norm of the joint mapped graph, so that higher is better
    PreprocessStep unit_step[] = {PreprocessStep::unit};
    auto mapped = preprocess(map_space(restrict_top_frequent(src, opts.limit), w), unit_step);
    auto target = preprocess(restrict_top_frequent(tgt, opts.limit), unit_step);
    std::vector<EmbeddingSpace> parts{std::move(mapped), std::move(target)};
    auto merged = merge_spaces(parts);
    GraphConfig cfg;
    cfg.k = opts.graph_k;
    cfg.backend = opts.backend;
    cfg.trees = opts.trees;
    cfg.leaf_capacity = opts.leaf_capacity;
    cfg.seed = opts.seed;
    cfg.threads = opts.threads;
    return -modularity(build_graph(merged, cfg)).q_norm;
}

struct RefinementTrace {
    struct Epoch {
        std::size_t epoch = 0;  // 0 is the initial mapping
        double score = 0.0;
        std::size_t dict_size = 0;
    };
    std::vector<Epoch> epochs;
    std::size_t best_epoch = 0;
    std::string metric_name;
};

struct RefineOptions {
    std::size_t epochs = 5;
    MetricOptions metric;
    std::size_t dict_size = 10000;
    bool mutual = true;
    std::size_t exact_threshold = 20000;  // r-cache policy during induction
};

struct RefineResult {
    MappingMatrix mapping;
    RefinementTrace trace;
    bool aborted = false;
    std::string abort_reason;
};

// Iterative Procrustes refinement: induce a dictionary under the current
// mapping, refit on it, re-score with the validation metric, and keep the
// best-scoring mapping seen (the initial one included). A collapsed
// dictionary aborts the loop but still returns the partial trace.
inline RefineResult refine(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                           const MappingMatrix& w0, const RefineOptions& opts) {
    if (opts.epochs == 0) throw InputError("refine: epochs must be >= 1");

    CslsOptions copts;
    copts.kappa = opts.metric.kappa;
    copts.limit = opts.metric.limit;
    copts.seed = opts.metric.seed;
    copts.trees = opts.metric.trees;
    copts.leaf_capacity = opts.metric.leaf_capacity;
    copts.threads = opts.metric.threads;
    copts.exact_threshold = opts.exact_threshold;

    RefineResult res;
    res.trace.metric_name = metric_name(opts.metric.metric);
    res.mapping = w0;
    double best_score = evaluate_metric(src, tgt, w0, opts.metric);
    res.trace.epochs.push_back({0, best_score, 0});
    res.trace.best_epoch = 0;

    MappingMatrix current = w0;
    for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        double score = 0.0;
        std::size_t dict_size = 0;
        try {
            auto ctx = build_csls_context(src, tgt, &current, copts);
            Lexicon dict = induce_dictionary(ctx, opts.dict_size, opts.mutual, copts.threads);
            dict_size = dict.pairs.size();
            current = fit_procrustes(src, tgt, dict);
            score = evaluate_metric(src, tgt, current, opts.metric);
        } catch (const DegenerateError& e) {
            // collapsed induction or a degenerate fit: stop, keep the trace
            res.aborted = true;
            res.abort_reason = e.what();
            return res;
        }
        res.trace.epochs.push_back({epoch, score, dict_size});
        if (score > best_score) {
            best_score = score;
            res.mapping = current;
            res.trace.best_epoch = epoch;
        }
    }
    return res;
}

struct SelectionResult {
    std::size_t best_index = 0;
    std::vector<double> scores;
};

// Evaluates the metric for every candidate; ties go to the lowest index.
inline SelectionResult select_mapping(const std::vector<MappingMatrix>& candidates,
                                      const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                      const MetricOptions& opts) {
    if (candidates.empty()) throw InputError("select_mapping: no candidates");
    SelectionResult res;
    for (const auto& cand : candidates)
        res.scores.push_back(evaluate_metric(src, tgt, cand, opts));
    res.best_index = 0;
    for (std::size_t i = 1; i < res.scores.size(); ++i)
        if (res.scores[i] > res.scores[res.best_index]) res.best_index = i;
    return res;
}

inline void write_trace_tsv(const RefinementTrace& trace, std::ostream& out) {
    out << "epoch\tmetric\tscore\tdict_size\n";
    for (const auto& e : trace.epochs)
        out << e.epoch << '\t' << trace.metric_name << '\t' << format17(e.score) << '\t'
            << e.dict_size << '\n';
}

}  // namespace clwe
