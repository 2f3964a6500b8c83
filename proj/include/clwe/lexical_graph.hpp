#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "clwe/embedding.hpp"
#include "clwe/error.hpp"
#include "clwe/numeric.hpp"
#include "clwe/parallel.hpp"
#include "clwe/rp_forest.hpp"

namespace clwe {

enum class KnnBackend { exact, forest };

// Union keeps an edge when either endpoint selected the other; mutual keeps
// it only when both did. Union is the default contract, mutual exists for
// sensitivity analysis.
enum class Symmetrize { union_, mutual };

struct GraphConfig {
    std::size_t k = 3;
    KnnBackend backend = KnnBackend::forest;
    Symmetrize symmetrize = Symmetrize::union_;
    std::size_t trees = 450;
    std::size_t leaf_capacity = 32;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = hardware parallelism
};

// Undirected weighted kNN graph over language-labeled nodes. Every stored
// edge has i < j and weight in (0, 1]; zero-weight edges are dropped since
// they contribute nothing to degrees or weight fractions.
struct LexicalGraph {
    struct Edge {
        std::uint32_t i = 0;
        std::uint32_t j = 0;
        double w = 0.0;
    };

    std::size_t n = 0;
    std::vector<std::string> words;
    std::vector<std::string> langs;
    std::size_t k = 0;
    std::vector<Edge> edges;      // sorted by (i, j)
    std::vector<double> degree;   // d_i = sum of incident weights
    double total_weight = 0.0;    // sum over ordered pairs = 2 * sum of edge weights
};

// Sorting summands before the pairwise reduction makes every derived sum
// independent of node numbering, which is what lets modularity come out
// bit-identical under node permutations and language renames.
inline double canonical_sum(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    return pairwise_sum(xs);
}

// Fills degree and total_weight from the edge list.
inline void finalize_graph(LexicalGraph& graph) {
    std::sort(graph.edges.begin(), graph.edges.end(), [](const auto& a, const auto& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    std::vector<std::vector<double>> incident(graph.n);
    for (const auto& e : graph.edges) {
        incident[e.i].push_back(e.w);
        incident[e.j].push_back(e.w);
    }
    graph.degree.assign(graph.n, 0.0);
    std::vector<double> degrees_copy(graph.n);
    for (std::size_t i = 0; i < graph.n; ++i) {
        graph.degree[i] = canonical_sum(incident[i]);
        degrees_copy[i] = graph.degree[i];
    }
    graph.total_weight = canonical_sum(degrees_copy);
}

// Builds the cosine-weighted kNN graph: every node contributes edges to its
// k nearest neighbors (self excluded) with weight max(0, cos); the directed
// selections are then symmetrized. Vectors must be unit length within 1e-6.
inline LexicalGraph build_graph(const EmbeddingSpace& space, const GraphConfig& cfg) {
    std::size_t n = space.size();
    if (n < 2) throw InputError("build_graph: need at least 2 nodes");
    if (cfg.k == 0) throw InputError("build_graph: k must be >= 1");
    if (cfg.k >= n)
        throw InputError("build_graph: k = " + std::to_string(cfg.k) +
                         " must be smaller than the node count " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        double nrm = norm(space.vector(i));
        if (std::abs(nrm - 1.0) > 1e-6)
            throw InputError("build_graph: vector for '" + space.words[i] + "' (" +
                             space.langs[i] + ") has norm " + std::to_string(nrm) +
                             "; unit-normalize first (preprocess step 'unit')");
    }

    RpForest forest;
    if (cfg.backend == KnnBackend::forest)
        forest = build_forest(space, cfg.trees, cfg.leaf_capacity, cfg.seed, cfg.threads);

    std::vector<std::vector<Neighbor>> selected(n);
    parallel_for(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto id = static_cast<std::uint32_t>(i);
            selected[i] = cfg.backend == KnnBackend::forest
                              ? knn(forest, space.vector(i), cfg.k, id)
                              : exact_knn(space, space.vector(i), cfg.k, id);
        }
    });

    // Key (min, max) -> weight; a pair selected from both sides computes the
    // same dot product, so keeping the first occurrence is exact.
    std::unordered_map<std::uint64_t, double> weights;
    std::unordered_map<std::uint64_t, int> sides;
    weights.reserve(n * cfg.k);
    auto key_of = [](std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | b;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& nb : selected[i]) {
            double w = nb.similarity > 0.0 ? nb.similarity : 0.0;
            if (w == 0.0) continue;
            std::uint64_t key = key_of(static_cast<std::uint32_t>(i), nb.id);
            weights.emplace(key, w);
            sides[key] += 1;
        }
    }

    LexicalGraph graph;
    graph.n = n;
    graph.words = space.words;
    graph.langs = space.langs;
    graph.k = cfg.k;
    graph.edges.reserve(weights.size());
    for (const auto& [key, w] : weights) {
        if (cfg.symmetrize == Symmetrize::mutual && sides[key] < 2) continue;
        graph.edges.push_back({static_cast<std::uint32_t>(key >> 32),
                               static_cast<std::uint32_t>(key & 0xffffffffu), w});
    }
    finalize_graph(graph);
    return graph;
}

// Restricts each language to its per_language_limit lowest-rank words, then
// builds the graph as build_graph. limit 0 keeps the full vocabulary.
inline LexicalGraph top_frequent_subgraph(const EmbeddingSpace& space,
                                          std::size_t per_language_limit,
                                          const GraphConfig& cfg) {
    if (per_language_limit == 0) return build_graph(space, cfg);
    return build_graph(restrict_top_frequent(space, per_language_limit), cfg);
}

// TSV edge list: word_i lang_i word_j lang_j weight (6 decimals), one
// undirected edge per line in (i, j) order.
inline void write_edges_tsv(const LexicalGraph& graph, std::ostream& out) {
    out << "word_i\tlang_i\tword_j\tlang_j\tweight\n";
    for (const auto& e : graph.edges)
        out << graph.words[e.i] << '\t' << graph.langs[e.i] << '\t' << graph.words[e.j] << '\t'
            << graph.langs[e.j] << '\t' << format6(e.w) << '\n';
}

}  // namespace clwe
