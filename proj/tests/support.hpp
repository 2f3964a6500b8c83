#pragma once

// Shared helpers for the test suites: fixture builders, independent oracles,
// and file scratch space. Oracles here deliberately re-derive results through
// a different code path than the library (dense matrices, naive loops) so
// the comparisons stay meaningful.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "clwe/csls.hpp"
#include "clwe/embedding.hpp"
#include "clwe/lexical_graph.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// fixtures

inline clwe::EmbeddingSpace make_space(const std::string& lang,
                                       const std::vector<std::string>& words,
                                       const std::vector<std::vector<double>>& vectors) {
    clwe::EmbeddingSpace space;
    space.dim = vectors.empty() ? 0 : vectors[0].size();
    for (std::size_t i = 0; i < words.size(); ++i)
        space.push(words[i], lang, i, vectors[i]);
    space.rebuild_index();
    return space;
}

inline std::vector<double> unit(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

// Graph from an explicit edge list; degrees and total weight via the library
// finalizer (the tested invariants compare against naive recomputation).
inline clwe::LexicalGraph make_graph(const std::vector<std::string>& langs,
                                     const std::vector<std::tuple<int, int, double>>& edge_list,
                                     std::size_t k = 3) {
    clwe::LexicalGraph graph;
    graph.n = langs.size();
    graph.langs = langs;
    graph.k = k;
    for (std::size_t i = 0; i < langs.size(); ++i) graph.words.push_back("w" + std::to_string(i));
    for (auto [i, j, w] : edge_list) {
        if (i > j) std::swap(i, j);
        graph.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w});
    }
    clwe::finalize_graph(graph);
    return graph;
}

// ---------------------------------------------------------------------------
// dense modularity oracle (naive evaluation over a full adjacency matrix)

struct ModularityOracle {
    double q = 0, q_max = 0, q_norm = 0;
    std::map<std::string, std::pair<double, double>> terms;  // lang -> (e_ll, a_l)
    bool defined = false;
};

inline ModularityOracle dense_modularity(const std::vector<std::string>& langs,
                                         const std::vector<std::vector<double>>& adjacency) {
    ModularityOracle out;
    std::size_t n = langs.size();
    std::vector<double> degree(n, 0.0);
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            degree[i] += adjacency[i][j];
            two_m += adjacency[i][j];
        }
    if (two_m <= 0.0) return out;
    std::map<std::string, double> a, e;
    for (std::size_t i = 0; i < n; ++i) {
        a[langs[i]] += degree[i] / two_m;
        for (std::size_t j = 0; j < n; ++j)
            if (langs[i] == langs[j]) e[langs[i]] += adjacency[i][j] / two_m;
    }
    double sum_a_sq = 0.0;
    for (auto& [lang, al] : a) {
        double ell = e.count(lang) ? e[lang] : 0.0;
        out.terms[lang] = {ell, al};
        out.q += ell - al * al;
        sum_a_sq += al * al;
    }
    out.q_max = 1.0 - sum_a_sq;
    if (out.q_max < 1e-12) return out;
    out.q_norm = out.q / out.q_max;
    out.defined = true;
    return out;
}

inline std::vector<std::vector<double>> dense_from_graph(const clwe::LexicalGraph& graph) {
    std::vector<std::vector<double>> a(graph.n, std::vector<double>(graph.n, 0.0));
    for (const auto& e : graph.edges) {
        a[e.i][e.j] = e.w;
        a[e.j][e.i] = e.w;
    }
    return a;
}

// Random labeled weighted graph with a defined normalized modularity.
inline clwe::LexicalGraph random_labeled_graph(std::mt19937& rng) {
    std::uniform_real_distribution<double> uw(0.0, 1.0);
    while (true) {
        std::size_t n = 4 + rng() % 27;     // 4..30 nodes
        std::size_t nlang = 2 + rng() % 3;  // 2..4 languages
        std::vector<std::string> langs;
        for (std::size_t i = 0; i < n; ++i) langs.push_back("l" + std::to_string(rng() % nlang));
        std::vector<std::tuple<int, int, double>> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng() % 100 < 35) {
                    double w = uw(rng);
                    if (w > 0.0) edges.emplace_back(int(i), int(j), w);
                }
        if (edges.empty()) continue;
        auto graph = make_graph(langs, edges);
        auto oracle = dense_modularity(langs, dense_from_graph(graph));
        if (!oracle.defined) continue;
        std::set<std::string> present(langs.begin(), langs.end());
        if (present.size() < 2) continue;
        return graph;
    }
}

// ---------------------------------------------------------------------------
// exhaustive CSLS oracle (same r caches, independent dots and ordering)

inline std::vector<std::pair<std::uint32_t, double>> oracle_csls_retrieve(
    const clwe::CslsContext& ctx, std::uint32_t s, std::size_t n) {
    std::vector<std::pair<std::uint32_t, double>> all;
    for (std::uint32_t t = 0; t < ctx.tgt_words.size(); ++t) {
        double d = 0;
        for (std::size_t c = 0; c < ctx.dim; ++c) d += ctx.src_vec(s)[c] * ctx.tgt_vec(t)[c];
        all.emplace_back(t, 2.0 * d - ctx.r_src[s] - ctx.r_tgt[t]);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (all.size() > n) all.resize(n);
    return all;
}

// ---------------------------------------------------------------------------
// independent statistics: sum-product formulas in long double, counting ranks

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    long double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    long double n = static_cast<long double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += static_cast<long double>(x[i]) * y[i];
        sxx += static_cast<long double>(x[i]) * x[i];
        syy += static_cast<long double>(y[i]) * y[i];
    }
    long double num = n * sxy - sx * sy;
    long double den = sqrtl((n * sxx - sx * sx) * (n * syy - sy * sy));
    return static_cast<double>(num / den);
}

inline std::vector<double> oracle_ranks(const std::vector<double>& xs) {
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::size_t below = 0, equal = 0;
        for (std::size_t j = 0; j < xs.size(); ++j) {
            if (xs[j] < xs[i]) ++below;
            if (xs[j] == xs[i]) ++equal;
        }
        ranks[i] = below + 0.5 * static_cast<double>(equal - 1) + 1.0;
    }
    return ranks;
}

inline double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return oracle_pearson(oracle_ranks(x), oracle_ranks(y));
}

// OLS of y on standardized features via long-double normal equations.
struct OracleFit {
    std::vector<double> beta;  // intercept first
    double r_squared = 0;
};

inline OracleFit oracle_ols_standardized(const std::vector<std::vector<double>>& features,
                                         const std::vector<double>& y) {
    std::size_t n = y.size();
    std::size_t p = features.size() + 1;
    std::vector<std::vector<long double>> a(n, std::vector<long double>(p, 1.0L));
    for (std::size_t f = 0; f < features.size(); ++f) {
        long double mean = 0;
        for (double v : features[f]) mean += v;
        mean /= n;
        long double var = 0;
        for (double v : features[f]) var += (v - mean) * (v - mean);
        var /= n;
        long double sd = sqrtl(var);
        for (std::size_t i = 0; i < n; ++i) a[i][f + 1] = (features[f][i] - mean) / sd;
    }
    std::vector<std::vector<long double>> m(p, std::vector<long double>(p + 1, 0.0L));
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c)
            for (std::size_t i = 0; i < n; ++i) m[r][c] += a[i][r] * a[i][c];
        for (std::size_t i = 0; i < n; ++i) m[r][p] += a[i][r] * y[i];
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (fabsl(m[r][col]) > fabsl(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            long double factor = m[r][col] / m[col][col];
            for (std::size_t c = col; c <= p; ++c) m[r][c] -= factor * m[col][c];
        }
    }
    OracleFit fit;
    for (std::size_t r = 0; r < p; ++r) fit.beta.push_back(static_cast<double>(m[r][p] / m[r][r]));
    long double y_mean = 0;
    for (double v : y) y_mean += v;
    y_mean /= n;
    long double ss_tot = 0, ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        long double pred = 0;
        for (std::size_t c = 0; c < p; ++c) pred += a[i][c] * fit.beta[c];
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - y_mean) * (y[i] - y_mean);
    }
    fit.r_squared = static_cast<double>(1.0L - ss_res / ss_tot);
    return fit;
}

// ---------------------------------------------------------------------------
// brute-force kNN oracle (independent of clwe::exact_knn)

struct OracleHit {
    std::size_t id;
    double sim;
};

inline std::vector<OracleHit> brute_knn(const clwe::EmbeddingSpace& space,
                                        const std::vector<double>& query, std::size_t k,
                                        long exclude = -1) {
    std::vector<OracleHit> all;
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (exclude >= 0 && i == static_cast<std::size_t>(exclude)) continue;
        auto v = space.vector(i);
        double dq = 0, nq = 0, nv = 0;
        for (std::size_t d = 0; d < space.dim; ++d) {
            dq += query[d] * v[d];
            nq += query[d] * query[d];
            nv += v[d] * v[d];
        }
        double denom = std::sqrt(nq) * std::sqrt(nv);
        all.push_back({i, denom == 0 ? 0.0 : dq / denom});
    }
    std::stable_sort(all.begin(), all.end(), [](const OracleHit& x, const OracleHit& y) {
        if (x.sim != y.sim) return x.sim > y.sim;
        return x.id < y.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

// ---------------------------------------------------------------------------
// synthetic embedding family with strictly increasing language separation
//
// Family member f keeps (f + 4) "clustered" words per language sitting on a
// language-specific pole (same-language cosine 0.81, cross 0.19) while the
// remaining words are exact cross-lingual twins on their own axes. With k = 3
// the clustered words only link within their language and the twins only link
// across, so the intra-language weight share grows strictly with f.

inline std::vector<clwe::EmbeddingSpace> separation_family(std::size_t members,
                                                           std::size_t words_per_lang = 12) {
    std::vector<clwe::EmbeddingSpace> out;
    std::size_t dim = words_per_lang + 2;
    for (std::size_t f = 0; f < members; ++f) {
        std::size_t clustered = f + 4;
        auto build = [&](const std::string& lang, std::size_t pole_axis) {
            std::vector<std::string> words;
            std::vector<std::vector<double>> vecs;
            for (std::size_t i = 0; i < words_per_lang; ++i) {
                std::vector<double> v(dim, 0.0);
                if (i < clustered) {
                    v[pole_axis] = 0.9;
                    v[i + 2] = std::sqrt(0.19);
                } else {
                    v[i + 2] = 1.0;
                }
                words.push_back(lang + std::to_string(i));
                vecs.push_back(unit(v));
            }
            return make_space(lang, words, vecs);
        };
        std::vector<clwe::EmbeddingSpace> parts{build("en", 0), build("ja", 1)};
        out.push_back(clwe::merge_spaces(parts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// scratch files

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("clwe_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testsupport
