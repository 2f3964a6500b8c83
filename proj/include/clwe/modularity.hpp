#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clwe/error.hpp"
#include "clwe/lexical_graph.hpp"
#include "clwe/numeric.hpp"

namespace clwe {

// Language-level modularity of a lexical graph. With 2m the total weighted
// degree, a_l the share of degree incident to language l and e_ll the share
// of edge weight joining two l-nodes:
//
//   a_l    = (1/2m) sum_i d_i [g_i = l]
//   e_ll   = (1/2m) sum_ij A_ij [g_i = l][g_j = l]
//   Q      = sum_l (e_ll - a_l^2)
//   Q_norm = Q / Q_max,   Q_max = 1 - sum_l a_l^2
//
// High Q_norm means neighbors are mostly same-language; well-mixed
// cross-lingual spaces sit near or below zero.
struct ModularityReport {
    struct LanguageTerms {
        double e_ll = 0.0;
        double a_l = 0.0;
    };

    double q = 0.0;
    double q_max = 0.0;
    double q_norm = 0.0;
    std::size_t k = 0;
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    std::vector<std::pair<std::string, LanguageTerms>> per_language;  // sorted by code
};

namespace detail {

inline std::vector<std::string> sorted_languages(const LexicalGraph& graph) {
    std::vector<std::string> langs(graph.langs.begin(), graph.langs.end());
    std::sort(langs.begin(), langs.end());
    langs.erase(std::unique(langs.begin(), langs.end()), langs.end());
    return langs;
}

inline double language_degree_share(const LexicalGraph& graph, std::string_view lang) {
    std::vector<double> degs;
    for (std::size_t i = 0; i < graph.n; ++i)
        if (graph.langs[i] == lang) degs.push_back(graph.degree[i]);
    return canonical_sum(degs) / graph.total_weight;
}

inline double language_intra_share(const LexicalGraph& graph, std::string_view lang) {
    std::vector<double> intra;
    for (const auto& e : graph.edges)
        if (graph.langs[e.i] == lang && graph.langs[e.j] == lang)
            intra.push_back(2.0 * e.w);  // ordered-pair sum counts each edge twice
    return canonical_sum(intra) / graph.total_weight;
}

}  // namespace detail

// a_l: expected fraction of edge weight incident to `language`; 0 when the
// language has no incident edges (including when it is absent entirely).
inline double expected_fraction(const LexicalGraph& graph, std::string_view language) {
    if (graph.total_weight <= 0.0) throw DegenerateError("expected_fraction: graph has no edges");
    return detail::language_degree_share(graph, language);
}

// e_ll: observed fraction of edge weight joining two `language` nodes.
inline double intra_fraction(const LexicalGraph& graph, std::string_view language) {
    if (graph.total_weight <= 0.0) throw DegenerateError("intra_fraction: graph has no edges");
    return detail::language_intra_share(graph, language);
}

inline ModularityReport modularity(const LexicalGraph& graph) {
    if (graph.edges.empty() || graph.total_weight <= 0.0)
        throw DegenerateError("modularity: graph has no edges");
    auto langs = detail::sorted_languages(graph);
    if (langs.size() < 2)
        throw DegenerateError("modularity: only one language present; Q_max = 0 leaves the "
                              "normalized metric undefined");

    ModularityReport report;
    report.k = graph.k;
    report.n_nodes = graph.n;
    report.n_edges = graph.edges.size();
    std::vector<double> q_terms, a_sq_terms;
    for (const auto& lang : langs) {
        ModularityReport::LanguageTerms terms;
        terms.a_l = detail::language_degree_share(graph, lang);
        terms.e_ll = detail::language_intra_share(graph, lang);
        q_terms.push_back(terms.e_ll - terms.a_l * terms.a_l);
        a_sq_terms.push_back(terms.a_l * terms.a_l);
        report.per_language.emplace_back(lang, terms);
    }
    // canonical order keeps the totals invariant under language renames
    report.q = canonical_sum(q_terms);
    report.q_max = 1.0 - canonical_sum(a_sq_terms);
    if (report.q_max < 1e-12)
        throw DegenerateError("modularity: all edge weight lies in one language; Q_max = 0 "
                              "leaves the normalized metric undefined");
    report.q_norm = report.q / report.q_max;
    return report;
}

// Graph construction and scoring in one step; per_language_limit 0 uses the
// full vocabulary, 10000 with k = 3 gives the Mod-10K validation metric.
inline ModularityReport modularity_from_space(const EmbeddingSpace& space, const GraphConfig& cfg,
                                              std::size_t per_language_limit = 0) {
    return modularity(top_frequent_subgraph(space, per_language_limit, cfg));
}

inline nlohmann::json report_to_json(const ModularityReport& report) {
    nlohmann::json langs = nlohmann::json::object();
    for (const auto& [code, terms] : report.per_language)
        langs[code] = {{"e_ll", terms.e_ll}, {"a_l", terms.a_l}};
    return nlohmann::json{{"q", report.q},
                          {"q_max", report.q_max},
                          {"q_norm", report.q_norm},
                          {"k", report.k},
                          {"n_nodes", report.n_nodes},
                          {"n_edges", report.n_edges},
                          {"languages", langs}};
}

}  // namespace clwe
