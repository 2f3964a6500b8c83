#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clwe/embedding.hpp"
#include "clwe/error.hpp"
#include "clwe/mapping_matrix.hpp"
#include "clwe/numeric.hpp"
#include "clwe/parallel.hpp"
#include "clwe/rp_forest.hpp"

namespace clwe {

// Cross-domain similarity local scaling between a mapped source word and a
// target word:
//
//   csls(s, t) = 2 cos(Ws, t) - r(Ws) - r(t)
//
// where r(x) is the mean cosine of x's top-kappa cross-lingual neighbors.
// The r caches are what discounts hub words that are near everything.

struct CslsOptions {
    std::size_t kappa = 10;
    std::size_t limit = 0;  // per-language frequency cutoff; 0 keeps everything
    // exact scan for the r caches up to this corpus size, RP forest beyond it
    std::size_t exact_threshold = 20000;
    std::size_t trees = 450;
    std::size_t leaf_capacity = 32;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct CslsContext {
    std::size_t dim = 0;
    std::size_t kappa = 10;
    std::string src_lang;
    std::string tgt_lang;
    std::vector<std::string> src_words;
    std::vector<std::string> tgt_words;
    std::vector<double> src_vecs;  // mapped and unit-normalized, row-major
    std::vector<double> tgt_vecs;  // unit-normalized, row-major
    std::vector<double> r_src;
    std::vector<double> r_tgt;
    std::unordered_map<std::string, std::uint32_t> src_index;
    std::unordered_map<std::string, std::uint32_t> tgt_index;

    std::span<const double> src_vec(std::size_t i) const { return {src_vecs.data() + i * dim, dim}; }
    std::span<const double> tgt_vec(std::size_t i) const { return {tgt_vecs.data() + i * dim, dim}; }

    std::optional<std::uint32_t> find_source(std::string_view w) const {
        auto it = src_index.find(std::string(w));
        return it == src_index.end() ? std::nullopt : std::optional<std::uint32_t>(it->second);
    }
    std::optional<std::uint32_t> find_target(std::string_view w) const {
        auto it = tgt_index.find(std::string(w));
        return it == tgt_index.end() ? std::nullopt : std::optional<std::uint32_t>(it->second);
    }
};

struct BliRow {
    std::string source;
    std::vector<std::string> golds;
    std::string predicted;
    bool correct = false;
    double score = 0.0;
};

struct BliResult {
    double p_at_1 = 0.0;
    std::size_t evaluated = 0;
    std::size_t correct = 0;
    std::size_t skipped_oov = 0;  // test pairs dropped because of OOV words
    std::vector<BliRow> rows;
};

struct LexiconExpansion {
    std::vector<std::pair<std::string, std::vector<Neighbor>>> expansions;
    std::vector<std::string> skipped_oov;
};

namespace detail {

inline EmbeddingSpace space_from_rows(const std::vector<std::string>& words,
                                      const std::string& lang, const std::vector<double>& rows,
                                      std::size_t dim) {
    EmbeddingSpace s;
    s.dim = dim;
    for (std::size_t i = 0; i < words.size(); ++i)
        s.push(words[i], lang, i, {rows.data() + i * dim, dim});
    s.rebuild_index();
    return s;
}

// Mean cosine of each query's top-kappa neighbors in the corpus. Both sides
// must already be unit length so cosine reduces to a dot product.
inline std::vector<double> neighborhood_means(const std::vector<double>& queries, std::size_t n_q,
                                              const EmbeddingSpace& corpus, std::size_t kappa,
                                              const CslsOptions& opts) {
    std::size_t dim = corpus.dim;
    std::size_t m = corpus.size();
    std::vector<double> out(n_q, 0.0);

    if (m <= opts.exact_threshold) {
        parallel_for(n_q, opts.threads, [&](std::size_t begin, std::size_t end) {
            std::vector<double> sims(m);
            for (std::size_t q = begin; q < end; ++q) {
                std::span<const double> qv(queries.data() + q * dim, dim);
                for (std::size_t j = 0; j < m; ++j) sims[j] = dot(qv, corpus.vector(j));
                std::size_t take = std::min(kappa, m);
                std::partial_sort(sims.begin(), sims.begin() + take, sims.end(),
                                  std::greater<double>());
                double sum = 0.0;
                for (std::size_t j = 0; j < take; ++j) sum += sims[j];
                out[q] = sum / static_cast<double>(take);
            }
        });
        return out;
    }

    auto forest = build_forest(corpus, opts.trees, opts.leaf_capacity, opts.seed, opts.threads);
    parallel_for(n_q, opts.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            std::span<const double> qv(queries.data() + q * dim, dim);
            auto hits = knn(forest, qv, kappa);
            double sum = 0.0;
            for (const auto& h : hits) sum += h.similarity;
            out[q] = hits.empty() ? 0.0 : sum / static_cast<double>(hits.size());
        }
    });
    return out;
}

inline void unit_rows_inplace(std::vector<double>& rows, std::size_t n, std::size_t dim,
                              const std::vector<std::string>& words, const std::string& side) {
    for (std::size_t i = 0; i < n; ++i) {
        std::span<double> row(rows.data() + i * dim, dim);
        double nrm = norm(row);
        if (nrm == 0.0)
            throw InputError("csls: zero-norm " + side + " vector for word '" + words[i] + "'");
        for (double& x : row) x /= nrm;
    }
}

}  // namespace detail

// Builds the retrieval context: restricts both sides to their `limit` most
// frequent words, maps the source through `mapping` (identity when null),
// unit-normalizes copies of both sides, and fills the r caches both ways.
inline CslsContext build_csls_context(const EmbeddingSpace& source, const EmbeddingSpace& target,
                                      const MappingMatrix* mapping, const CslsOptions& opts) {
    if (source.languages().size() != 1 || target.languages().size() != 1)
        throw InputError("build_csls_context: source and target must each hold one language");
    if (source.dim != target.dim)
        throw InputError("build_csls_context: dimension mismatch between source and target");
    if (mapping && mapping->dim != source.dim)
        throw InputError("build_csls_context: mapping dimension does not match the spaces");
    if (opts.kappa == 0) throw InputError("build_csls_context: kappa must be >= 1");

    auto src = restrict_top_frequent(source, opts.limit);
    auto tgt = restrict_top_frequent(target, opts.limit);
    if (src.size() == 0 || tgt.size() == 0)
        throw DegenerateError("build_csls_context: empty vocabulary after frequency restriction");

    CslsContext ctx;
    ctx.dim = src.dim;
    ctx.kappa = opts.kappa;
    ctx.src_lang = src.langs[0];
    ctx.tgt_lang = tgt.langs[0];
    ctx.src_words = src.words;
    ctx.tgt_words = tgt.words;

    ctx.src_vecs.resize(src.size() * ctx.dim);
    if (mapping) {
        std::vector<double> row(ctx.dim);
        for (std::size_t i = 0; i < src.size(); ++i) {
            apply_mapping(*mapping, src.vector(i), row);
            std::copy(row.begin(), row.end(), ctx.src_vecs.begin() + i * ctx.dim);
        }
    } else {
        ctx.src_vecs = src.data;
    }
    ctx.tgt_vecs = tgt.data;
    detail::unit_rows_inplace(ctx.src_vecs, src.size(), ctx.dim, ctx.src_words, "source");
    detail::unit_rows_inplace(ctx.tgt_vecs, tgt.size(), ctx.dim, ctx.tgt_words, "target");

    for (std::size_t i = 0; i < ctx.src_words.size(); ++i)
        ctx.src_index.emplace(ctx.src_words[i], static_cast<std::uint32_t>(i));
    for (std::size_t i = 0; i < ctx.tgt_words.size(); ++i)
        ctx.tgt_index.emplace(ctx.tgt_words[i], static_cast<std::uint32_t>(i));

    auto tgt_unit = detail::space_from_rows(ctx.tgt_words, ctx.tgt_lang, ctx.tgt_vecs, ctx.dim);
    auto src_unit = detail::space_from_rows(ctx.src_words, ctx.src_lang, ctx.src_vecs, ctx.dim);
    ctx.r_src = detail::neighborhood_means(ctx.src_vecs, ctx.src_words.size(), tgt_unit,
                                           opts.kappa, opts);
    ctx.r_tgt = detail::neighborhood_means(ctx.tgt_vecs, ctx.tgt_words.size(), src_unit,
                                           opts.kappa, opts);
    return ctx;
}

inline double csls_by_id(const CslsContext& ctx, std::uint32_t s, std::uint32_t t) {
    return 2.0 * dot(ctx.src_vec(s), ctx.tgt_vec(t)) - ctx.r_src[s] - ctx.r_tgt[t];
}

inline double csls(const CslsContext& ctx, std::string_view source_word,
                   std::string_view target_word) {
    auto s = ctx.find_source(source_word);
    if (!s) throw InputError("csls: source word not in vocabulary: '" + std::string(source_word) + "'");
    auto t = ctx.find_target(target_word);
    if (!t) throw InputError("csls: target word not in vocabulary: '" + std::string(target_word) + "'");
    return csls_by_id(ctx, *s, *t);
}

// Top-n targets by CSLS, descending, ties to the lower node id.
inline std::vector<Neighbor> csls_retrieve_by_id(const CslsContext& ctx, std::uint32_t s,
                                                 std::size_t n) {
    if (n == 0) throw InputError("csls_retrieve: n must be >= 1");
    std::vector<Neighbor> pool;
    pool.reserve(ctx.tgt_words.size());
    for (std::uint32_t t = 0; t < ctx.tgt_words.size(); ++t)
        pool.push_back({t, csls_by_id(ctx, s, t)});
    return detail::top_k(pool, n);
}

inline std::vector<Neighbor> csls_retrieve(const CslsContext& ctx, std::string_view source_word,
                                           std::size_t n) {
    auto s = ctx.find_source(source_word);
    if (!s) throw InputError("csls_retrieve: source word not in vocabulary: '" +
                             std::string(source_word) + "'");
    return csls_retrieve_by_id(ctx, *s, n);
}

// P@1 over distinct source words: a word counts as evaluated when it is in
// vocabulary and keeps at least one in-vocabulary gold translation; it is
// correct when the CSLS top-1 target is any of those golds. Every test pair
// dropped for an OOV side increments skipped_oov.
inline BliResult bli_p_at_1(const CslsContext& ctx, const Lexicon& test) {
    if (test.source_language != ctx.src_lang || test.target_language != ctx.tgt_lang)
        throw InputError("bli_p_at_1: lexicon languages (" + test.source_language + "->" +
                         test.target_language + ") do not match the context (" + ctx.src_lang +
                         "->" + ctx.tgt_lang + ")");

    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> golds;
    BliResult res;
    for (const auto& [s, t] : test.pairs) {
        if (!ctx.find_source(s) || !ctx.find_target(t)) {
            ++res.skipped_oov;
            continue;
        }
        auto [it, fresh] = golds.try_emplace(s);
        if (fresh) order.push_back(s);
        if (std::find(it->second.begin(), it->second.end(), t) == it->second.end())
            it->second.push_back(t);
    }
    if (order.empty())
        throw DegenerateError("bli_p_at_1: no evaluable source words (all pairs OOV)");

    for (const auto& s : order) {
        auto top = csls_retrieve(ctx, s, 1);
        BliRow row;
        row.source = s;
        row.golds = golds[s];
        row.predicted = ctx.tgt_words[top[0].id];
        row.score = top[0].similarity;
        row.correct =
            std::find(row.golds.begin(), row.golds.end(), row.predicted) != row.golds.end();
        if (row.correct) ++res.correct;
        res.rows.push_back(std::move(row));
    }
    res.evaluated = order.size();
    res.p_at_1 = static_cast<double>(res.correct) / static_cast<double>(res.evaluated);
    return res;
}

// Per-seed top-n cross-lingual neighbors, by CSLS or raw cosine. OOV seeds
// are skipped and reported.
inline LexiconExpansion expand_lexicon(const CslsContext& ctx,
                                       const std::vector<std::string>& seeds, std::size_t n,
                                       bool use_csls = true) {
    if (seeds.empty()) throw InputError("expand_lexicon: no seeds given");
    LexiconExpansion out;
    for (const auto& seed : seeds) {
        auto s = ctx.find_source(seed);
        if (!s) {
            out.skipped_oov.push_back(seed);
            continue;
        }
        std::vector<Neighbor> pool;
        pool.reserve(ctx.tgt_words.size());
        for (std::uint32_t t = 0; t < ctx.tgt_words.size(); ++t) {
            double score = use_csls ? csls_by_id(ctx, *s, t) : dot(ctx.src_vec(*s), ctx.tgt_vec(t));
            pool.push_back({t, score});
        }
        out.expansions.emplace_back(seed, detail::top_k(pool, n));
    }
    if (out.expansions.empty()) throw DegenerateError("expand_lexicon: every seed is OOV");
    return out;
}

// Mean cos(Ws, t) over the in-vocabulary pairs of `lex`.
inline double mean_translation_cosine(const CslsContext& ctx, const Lexicon& lex) {
    std::vector<double> cosines;
    for (const auto& [s, t] : lex.pairs) {
        auto si = ctx.find_source(s);
        auto ti = ctx.find_target(t);
        if (si && ti) cosines.push_back(dot(ctx.src_vec(*si), ctx.tgt_vec(*ti)));
    }
    if (cosines.empty())
        throw DegenerateError("mean_translation_cosine: no in-vocabulary pairs");
    return pairwise_sum(cosines) / static_cast<double>(cosines.size());
}

// Mean top-1 CSLS over every source word in the context. Built over the 10K
// most frequent words per side (opts.limit = 10000) this is the CSLS-10K
// validation metric; higher is better.
inline double csls_10k(const CslsContext& ctx, unsigned threads = 0) {
    std::vector<double> best(ctx.src_words.size());
    parallel_for(ctx.src_words.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s)
            best[s] = csls_retrieve_by_id(ctx, static_cast<std::uint32_t>(s), 1)[0].similarity;
    });
    return pairwise_sum(best) / static_cast<double>(best.size());
}

inline void write_bli_tsv(const BliResult& res, std::ostream& out) {
    out << "source\tgolds\tpredicted\tcorrect\tcsls\n";
    for (const auto& row : res.rows) {
        out << row.source << '\t';
        for (std::size_t g = 0; g < row.golds.size(); ++g) {
            if (g) out << '|';
            out << row.golds[g];
        }
        out << '\t' << row.predicted << '\t' << (row.correct ? 1 : 0) << '\t'
            << format6(row.score) << '\n';
    }
}

}  // namespace clwe
