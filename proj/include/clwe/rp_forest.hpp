#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "clwe/embedding.hpp"
#include "clwe/error.hpp"
#include "clwe/numeric.hpp"
#include "clwe/parallel.hpp"

namespace clwe {

struct Neighbor {
    std::uint32_t id = 0;
    double similarity = 0.0;
};

inline bool neighbor_before(const Neighbor& a, const Neighbor& b) {
    // Higher similarity first; ties broken by lower node id for reproducibility.
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
}

// Forest of random projection trees over a copied point set. Each internal
// node splits by the hyperplane through the midpoint of two points sampled
// from the node (Annoy-style); recursion stops at leaf_capacity points.
// Rebuilding with the same inputs and seed gives identical trees.
struct RpForest {
    struct Node {
        std::int32_t left = -1;  // < 0 for leaves
        std::int32_t right = -1;
        std::uint32_t begin = 0;  // leaf range into items
        std::uint32_t end = 0;
        std::uint32_t plane = 0;  // internal: offset into planes (dim doubles)
        double threshold = 0.0;
    };
    struct Tree {
        std::vector<Node> nodes;
        std::vector<std::uint32_t> items;
        std::vector<double> planes;
    };

    std::size_t dim = 0;
    std::size_t leaf_capacity = 32;
    std::uint64_t seed = 0;
    std::vector<double> points;  // n x dim copy of the indexed vectors
    std::vector<double> norms;
    std::vector<Tree> trees;

    std::size_t size() const { return norms.size(); }

    std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

namespace detail {

struct TreeSplit {
    std::vector<double> normal;
    double threshold = 0.0;
    bool ok = false;
};

inline TreeSplit sample_split(const RpForest& forest, std::span<const std::uint32_t> ids,
                              std::mt19937_64& rng) {
    TreeSplit split;
    std::size_t count = ids.size();
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::size_t a = static_cast<std::size_t>(rng() % count);
        std::size_t b = static_cast<std::size_t>(rng() % count);
        if (a == b) continue;
        auto pa = forest.point(ids[a]);
        auto pb = forest.point(ids[b]);
        split.normal.assign(pa.begin(), pa.end());
        double norm2 = 0.0;
        double mid_dot = 0.0;
        for (std::size_t d = 0; d < forest.dim; ++d) {
            split.normal[d] -= pb[d];
            norm2 += split.normal[d] * split.normal[d];
            mid_dot += split.normal[d] * (pa[d] + pb[d]);
        }
        if (norm2 == 0.0) continue;  // coincident points, resample
        split.threshold = 0.5 * mid_dot;
        split.ok = true;
        return split;
    }
    return split;
}

inline void build_tree(RpForest& forest, RpForest::Tree& tree, std::uint64_t tree_seed) {
    std::size_t n = forest.size();
    tree.items.resize(n);
    for (std::size_t i = 0; i < n; ++i) tree.items[i] = static_cast<std::uint32_t>(i);
    std::mt19937_64 rng(tree_seed);

    struct Pending {
        std::uint32_t begin, end;
        std::int32_t node;
    };
    std::vector<Pending> stack;
    tree.nodes.push_back({});
    stack.push_back({0, static_cast<std::uint32_t>(n), 0});
    std::vector<std::uint32_t> left_buf, right_buf;

    while (!stack.empty()) {
        auto [begin, end, node_idx] = stack.back();
        stack.pop_back();
        std::uint32_t count = end - begin;
        if (count <= forest.leaf_capacity) {
            tree.nodes[node_idx].begin = begin;
            tree.nodes[node_idx].end = end;
            continue;
        }

        std::span<const std::uint32_t> ids(tree.items.data() + begin, count);
        TreeSplit split = sample_split(forest, ids, rng);

        std::uint32_t mid;
        if (split.ok) {
            left_buf.clear();
            right_buf.clear();
            for (std::uint32_t idx : ids) {
                double margin = dot(forest.point(idx), split.normal) - split.threshold;
                (margin <= 0.0 ? left_buf : right_buf).push_back(idx);
            }
            if (left_buf.empty() || right_buf.empty()) split.ok = false;
        }
        if (!split.ok) {
            // Degenerate hyperplane (duplicates or one-sided): split evenly in
            // the current order so recursion always terminates.
            mid = begin + count / 2;
            split.normal.assign(forest.dim, 0.0);
            split.threshold = 0.0;
        } else {
            mid = begin + static_cast<std::uint32_t>(left_buf.size());
            std::copy(left_buf.begin(), left_buf.end(), tree.items.begin() + begin);
            std::copy(right_buf.begin(), right_buf.end(), tree.items.begin() + mid);
        }

        std::uint32_t plane_off = static_cast<std::uint32_t>(tree.planes.size());
        tree.planes.insert(tree.planes.end(), split.normal.begin(), split.normal.end());

        std::int32_t left_idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        std::int32_t right_idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[node_idx].left = left_idx;
        tree.nodes[node_idx].right = right_idx;
        tree.nodes[node_idx].plane = plane_off;
        tree.nodes[node_idx].threshold = split.threshold;
        stack.push_back({begin, mid, left_idx});
        stack.push_back({mid, end, right_idx});
    }
}

// Even splits (degenerate hyperplanes) store an all-zero normal, which sends
// every query left; that only costs recall, never correctness.
inline const RpForest::Node& descend(const RpForest& forest, const RpForest::Tree& tree,
                                     std::span<const double> query) {
    const RpForest::Node* node = &tree.nodes[0];
    while (node->left >= 0) {
        std::span<const double> normal(tree.planes.data() + node->plane, forest.dim);
        double margin = dot(query, normal) - node->threshold;
        node = &tree.nodes[margin <= 0.0 ? node->left : node->right];
    }
    return *node;
}

inline std::vector<Neighbor> top_k(std::vector<Neighbor>& pool, std::size_t k) {
    if (pool.size() > k) {
        std::partial_sort(pool.begin(), pool.begin() + k, pool.end(), neighbor_before);
        pool.resize(k);
    } else {
        std::sort(pool.begin(), pool.end(), neighbor_before);
    }
    return pool;
}

}  // namespace detail

inline RpForest build_forest(const EmbeddingSpace& space, std::size_t trees,
                             std::size_t leaf_capacity, std::uint64_t seed,
                             unsigned threads = 0) {
    if (space.size() == 0) throw InputError("build_forest: empty space");
    if (trees == 0) throw InputError("build_forest: tree count must be >= 1");
    if (leaf_capacity == 0) throw InputError("build_forest: leaf capacity must be >= 1");

    RpForest forest;
    forest.dim = space.dim;
    forest.leaf_capacity = leaf_capacity;
    forest.seed = seed;
    forest.points = space.data;
    forest.norms.resize(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) forest.norms[i] = norm(space.vector(i));
    forest.trees.resize(trees);

    parallel_for(trees, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t)
            detail::build_tree(forest, forest.trees[t], mix_seed(seed, t));
    });
    return forest;
}

// Approximate kNN: the candidate pool is the union of the leaves the query
// reaches across all trees, rescored by exact cosine. May return fewer than
// k entries when the pool is small.
inline std::vector<Neighbor> knn(const RpForest& forest, std::span<const double> query,
                                 std::size_t k,
                                 std::optional<std::uint32_t> exclude_self = std::nullopt) {
    if (k == 0) throw InputError("knn: k must be >= 1");
    if (query.size() != forest.dim)
        throw InputError("knn: query dimension " + std::to_string(query.size()) +
                         " does not match index dimension " + std::to_string(forest.dim));

    std::vector<char> visited(forest.size(), 0);
    double qnorm = norm(query);
    std::vector<Neighbor> pool;
    for (const auto& tree : forest.trees) {
        const auto& leaf = detail::descend(forest, tree, query);
        for (std::uint32_t pos = leaf.begin; pos < leaf.end; ++pos) {
            std::uint32_t id = tree.items[pos];
            if (visited[id]) continue;
            visited[id] = 1;
            if (exclude_self && id == *exclude_self) continue;
            double denom = qnorm * forest.norms[id];
            double sim = denom == 0.0 ? 0.0 : dot(query, forest.point(id)) / denom;
            pool.push_back({id, sim});
        }
    }
    return detail::top_k(pool, k);
}

// Exhaustive exact kNN over a space; the oracle counterpart of knn() and the
// backend used when approximation is not wanted.
inline std::vector<Neighbor> exact_knn(const EmbeddingSpace& space, std::span<const double> query,
                                       std::size_t k,
                                       std::optional<std::uint32_t> exclude_self = std::nullopt) {
    if (k == 0) throw InputError("exact_knn: k must be >= 1");
    if (query.size() != space.dim)
        throw InputError("exact_knn: query dimension " + std::to_string(query.size()) +
                         " does not match space dimension " + std::to_string(space.dim));
    double qnorm = norm(query);
    std::vector<Neighbor> pool;
    pool.reserve(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
        std::uint32_t id = static_cast<std::uint32_t>(i);
        if (exclude_self && id == *exclude_self) continue;
        double denom = qnorm * norm(space.vector(i));
        double sim = denom == 0.0 ? 0.0 : dot(query, space.vector(i)) / denom;
        pool.push_back({id, sim});
    }
    return detail::top_k(pool, k);
}

}  // namespace clwe
