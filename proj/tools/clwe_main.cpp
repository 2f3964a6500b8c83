// clwe: measure cross-lingual embedding quality via lexical-graph modularity,
// evaluate bilingual lexicon induction with CSLS, and run Procrustes
// refinement with pluggable validation metrics.
//
// Exit codes: 0 success, 2 input error, 3 degenerate/undefined metric.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "clwe/csls.hpp"
#include "clwe/embedding.hpp"
#include "clwe/lexical_graph.hpp"
#include "clwe/mapping.hpp"
#include "clwe/modularity.hpp"
#include "clwe/stats.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
    std::vector<std::string> emb;  // lang=path, repeatable
    std::string src;               // lang=path
    std::string tgt;               // lang=path
    std::string lexicon;
    std::string exclude;
    std::string mapping;
    std::string metric;
    std::size_t k = 3;
    std::size_t trees = 450;
    std::string knn = "forest";
    std::size_t limit = 10000;
    std::size_t kappa = 10;
    std::size_t epochs = 5;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string preprocess_chain = "unit,center,unit";
    std::string out;
    bool lowercase = false;
    std::string symmetrize = "union";
    // stats inputs
    std::string table;
    std::string manifest;
    std::string x_col;
    std::string y_col;
    std::string target_col;
    std::string ablate_col;
    std::string ks = "3";
    std::string ts = "450";
    std::string edges;
};

std::pair<std::string, std::string> parse_lang_path(const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
        throw clwe::InputError("expected lang=path, got '" + spec + "'");
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

std::vector<std::size_t> parse_size_list(const std::string& spec, const std::string& flag) {
    std::vector<std::size_t> out;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoul(tok));
        } catch (const std::exception&) {
            throw clwe::InputError(flag + ": not a count: '" + tok + "'");
        }
    }
    if (out.empty()) throw clwe::InputError(flag + ": empty list");
    return out;
}

clwe::KnnBackend parse_backend(const std::string& name) {
    if (name == "exact") return clwe::KnnBackend::exact;
    if (name == "forest") return clwe::KnnBackend::forest;
    throw clwe::InputError("unknown --knn backend '" + name + "' (expected exact or forest)");
}

clwe::Symmetrize parse_symmetrize(const std::string& name) {
    if (name == "union") return clwe::Symmetrize::union_;
    if (name == "mutual") return clwe::Symmetrize::mutual;
    throw clwe::InputError("unknown --symmetrize mode '" + name + "' (expected union or mutual)");
}

clwe::EmbeddingSpace load_preprocessed(const std::string& lang, const std::string& path,
                                       const CommonFlags& flags) {
    auto chain = clwe::parse_preprocess_chain(flags.preprocess_chain);
    auto space = clwe::load_embeddings(path, lang, flags.lowercase);
    if (space.duplicates_dropped > 0)
        std::cerr << "clwe: " << path << ": dropped " << space.duplicates_dropped
                  << " duplicate words (first occurrence kept)\n";
    if (chain.empty()) return space;
    return clwe::preprocess(std::move(space), chain);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw clwe::InputError("cannot write output file: " + path);
    out << content;
    if (!out) throw clwe::InputError("write failed: " + path);
    if (content.empty()) throw clwe::InputError("refusing to leave an empty artifact: " + path);
}

// Resolved configuration that all outputs embed or accompany. The thread
// count is execution detail and must not change output bytes, so it is
// logged to stderr but never serialized.
json base_config(const std::string& subcommand, const CommonFlags& flags) {
    json cfg;
    cfg["subcommand"] = subcommand;
    cfg["seed"] = flags.seed;
    cfg["preprocess"] = flags.preprocess_chain;
    cfg["lowercase"] = flags.lowercase;
    return cfg;
}

void log_config(const json& cfg, const CommonFlags& flags) {
    json full = cfg;
    full["threads"] = flags.threads;  // stderr only
    std::cerr << "clwe config: " << full.dump() << "\n";
}

std::string with_config_comment(const json& cfg, const std::string& body) {
    return "# config " + cfg.dump() + "\n" + body;
}

// ---------------------------------------------------------------------------

int run_modularity(const CommonFlags& flags) {
    if (flags.emb.empty()) throw clwe::InputError("--emb lang=path is required (repeatable)");
    json cfg = base_config("modularity", flags);
    cfg["k"] = flags.k;
    cfg["trees"] = flags.trees;
    cfg["knn"] = flags.knn;
    cfg["limit"] = flags.limit;
    cfg["symmetrize"] = flags.symmetrize;
    json emb_map = json::object();

    std::vector<clwe::EmbeddingSpace> spaces;
    for (const auto& spec : flags.emb) {
        auto [lang, path] = parse_lang_path(spec);
        emb_map[lang] = path;
        spaces.push_back(load_preprocessed(lang, path, flags));
    }
    cfg["emb"] = emb_map;
    log_config(cfg, flags);

    auto merged = clwe::merge_spaces(spaces);
    clwe::GraphConfig gcfg;
    gcfg.k = flags.k;
    gcfg.backend = parse_backend(flags.knn);
    gcfg.symmetrize = parse_symmetrize(flags.symmetrize);
    gcfg.trees = flags.trees;
    gcfg.seed = flags.seed;
    gcfg.threads = flags.threads;
    auto graph = clwe::top_frequent_subgraph(merged, flags.limit, gcfg);
    auto report = clwe::modularity(graph);

    json out = clwe::report_to_json(report);
    out["config"] = cfg;
    write_text_file(flags.out, out.dump(2) + "\n");
    if (!flags.edges.empty()) {
        std::ostringstream tsv;
        clwe::write_edges_tsv(graph, tsv);
        write_text_file(flags.edges, with_config_comment(cfg, tsv.str()));
    }
    std::cerr << "clwe modularity: q_norm = " << report.q_norm << " over " << report.n_nodes
              << " nodes, " << report.n_edges << " edges -> " << flags.out << "\n";
    return 0;
}

int run_bli(const CommonFlags& flags) {
    if (flags.src.empty() || flags.tgt.empty())
        throw clwe::InputError("--src and --tgt lang=path are required");
    if (flags.lexicon.empty()) throw clwe::InputError("--lexicon is required");
    auto [src_lang, src_path] = parse_lang_path(flags.src);
    auto [tgt_lang, tgt_path] = parse_lang_path(flags.tgt);

    json cfg = base_config("bli", flags);
    cfg["src"] = {{src_lang, src_path}};
    cfg["tgt"] = {{tgt_lang, tgt_path}};
    cfg["lexicon"] = flags.lexicon;
    cfg["kappa"] = flags.kappa;
    cfg["limit"] = flags.limit;
    if (!flags.exclude.empty()) cfg["exclude"] = flags.exclude;
    if (!flags.mapping.empty()) cfg["mapping"] = flags.mapping;
    log_config(cfg, flags);

    auto src = load_preprocessed(src_lang, src_path, flags);
    auto tgt = load_preprocessed(tgt_lang, tgt_path, flags);
    auto lex = clwe::load_lexicon(flags.lexicon, src_lang, tgt_lang, flags.lowercase);
    if (!flags.exclude.empty()) {
        auto excl = clwe::load_lexicon(flags.exclude, src_lang, tgt_lang, flags.lowercase);
        lex = clwe::filter_lexicon(lex, excl);
        std::cerr << "clwe bli: " << lex.pairs.size() << " test pairs after exclusion\n";
    }

    clwe::MappingMatrix mapping = clwe::MappingMatrix::identity(src.dim);
    if (!flags.mapping.empty()) mapping = clwe::load_mapping(flags.mapping);

    clwe::CslsOptions copts;
    copts.kappa = flags.kappa;
    copts.limit = flags.limit;
    copts.trees = flags.trees;
    copts.seed = flags.seed;
    copts.threads = flags.threads;
    auto ctx = clwe::build_csls_context(src, tgt, &mapping, copts);
    auto res = clwe::bli_p_at_1(ctx, lex);

    std::ostringstream tsv;
    clwe::write_bli_tsv(res, tsv);
    write_text_file(flags.out + ".tsv", with_config_comment(cfg, tsv.str()));
    json summary{{"p_at_1", res.p_at_1},
                 {"evaluated", res.evaluated},
                 {"correct", res.correct},
                 {"skipped_oov", res.skipped_oov},
                 {"config", cfg}};
    write_text_file(flags.out + ".json", summary.dump(2) + "\n");
    std::cerr << "clwe bli: P@1 = " << res.p_at_1 << " on " << res.evaluated << " words ("
              << res.skipped_oov << " OOV pairs skipped) -> " << flags.out << ".{tsv,json}\n";
    return 0;
}

int run_refine(const CommonFlags& flags) {
    if (flags.src.empty() || flags.tgt.empty())
        throw clwe::InputError("--src and --tgt lang=path are required");
    if (flags.metric.empty()) throw clwe::InputError("--metric {csls10k, mod10k} is required");
    auto metric = clwe::parse_metric(flags.metric);
    auto [src_lang, src_path] = parse_lang_path(flags.src);
    auto [tgt_lang, tgt_path] = parse_lang_path(flags.tgt);

    json cfg = base_config("refine", flags);
    cfg["src"] = {{src_lang, src_path}};
    cfg["tgt"] = {{tgt_lang, tgt_path}};
    cfg["metric"] = flags.metric;
    cfg["epochs"] = flags.epochs;
    cfg["k"] = flags.k;
    cfg["kappa"] = flags.kappa;
    cfg["limit"] = flags.limit;
    cfg["trees"] = flags.trees;
    cfg["knn"] = flags.knn;
    if (!flags.mapping.empty()) cfg["mapping"] = flags.mapping;
    if (!flags.lexicon.empty()) cfg["lexicon"] = flags.lexicon;
    log_config(cfg, flags);

    auto src = load_preprocessed(src_lang, src_path, flags);
    auto tgt = load_preprocessed(tgt_lang, tgt_path, flags);

    clwe::MappingMatrix w0 = clwe::MappingMatrix::identity(src.dim);
    if (!flags.mapping.empty() && !flags.lexicon.empty())
        throw clwe::InputError("--mapping and --lexicon are mutually exclusive initializers");
    if (!flags.mapping.empty()) {
        w0 = clwe::load_mapping(flags.mapping);
    } else if (!flags.lexicon.empty()) {
        auto seed_lex = clwe::load_lexicon(flags.lexicon, src_lang, tgt_lang, flags.lowercase);
        clwe::FitInfo info;
        w0 = clwe::fit_procrustes(src, tgt, seed_lex, &info);
        for (const auto& warning : info.warnings) std::cerr << "clwe refine: " << warning << "\n";
    }

    clwe::RefineOptions opts;
    opts.epochs = flags.epochs;
    opts.metric.metric = metric;
    opts.metric.limit = flags.limit;
    opts.metric.kappa = flags.kappa;
    opts.metric.graph_k = flags.k;
    opts.metric.backend = parse_backend(flags.knn);
    opts.metric.trees = flags.trees;
    opts.metric.seed = flags.seed;
    opts.metric.threads = flags.threads;
    opts.dict_size = flags.limit == 0 ? 10000 : flags.limit;
    auto res = clwe::refine(src, tgt, w0, opts);

    std::ostringstream trace;
    clwe::write_trace_tsv(res.trace, trace);
    write_text_file(flags.out + ".trace.tsv", with_config_comment(cfg, trace.str()));
    if (res.aborted) {
        std::cerr << "clwe refine: aborted: " << res.abort_reason << " (partial trace written)\n";
        throw clwe::DegenerateError(res.abort_reason);
    }
    clwe::save_mapping(res.mapping, flags.out + ".mapping.txt");
    std::cerr << "clwe refine: best epoch " << res.trace.best_epoch << " ("
              << res.trace.metric_name << " = "
              << res.trace.epochs[res.trace.best_epoch].score << ") -> " << flags.out
              << ".{mapping.txt,trace.tsv}\n";
    return 0;
}

// Plain TSV column reader for correlate (any two named numeric columns).
std::map<std::string, std::vector<double>> load_columns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw clwe::InputError("cannot open table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw clwe::InputError(path + ": empty file");
    clwe::detail::strip_cr(line);
    auto header = clwe::detail::split_ws(line);
    std::vector<std::string> names(header.begin(), header.end());
    std::map<std::string, std::vector<double>> cols;
    for (const auto& n : names) cols[n];
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        clwe::detail::strip_cr(line);
        auto toks = clwe::detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != names.size())
            throw clwe::InputError(path + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(names.size()) + " columns");
        for (std::size_t c = 0; c < toks.size(); ++c)
            cols[names[c]].push_back(clwe::detail::parse_double(toks[c], line_no, path));
    }
    return cols;
}

int run_correlate(const CommonFlags& flags) {
    if (flags.table.empty()) throw clwe::InputError("--table is required");
    if (flags.x_col.empty() || flags.y_col.empty())
        throw clwe::InputError("--x and --y column names are required");
    json cfg = base_config("correlate", flags);
    cfg["table"] = flags.table;
    cfg["x"] = flags.x_col;
    cfg["y"] = flags.y_col;
    log_config(cfg, flags);

    auto cols = load_columns(flags.table);
    if (!cols.count(flags.x_col)) throw clwe::InputError("no column named '" + flags.x_col + "'");
    if (!cols.count(flags.y_col)) throw clwe::InputError("no column named '" + flags.y_col + "'");
    double r = clwe::pearson(cols[flags.x_col], cols[flags.y_col]);
    double rho = clwe::spearman(cols[flags.x_col], cols[flags.y_col]);

    std::string body = "pearson\tspearman\n" + clwe::format6(r) + "\t" + clwe::format6(rho) + "\n";
    write_text_file(flags.out, with_config_comment(cfg, body));
    std::cerr << "clwe correlate: pearson = " << r << ", spearman = " << rho << " -> "
              << flags.out << "\n";
    return 0;
}

int run_ablate(const CommonFlags& flags) {
    if (flags.table.empty()) throw clwe::InputError("--table is required");
    if (flags.target_col.empty()) throw clwe::InputError("--target column name is required");
    json cfg = base_config("ablate", flags);
    cfg["table"] = flags.table;
    cfg["target"] = flags.target_col;
    if (!flags.ablate_col.empty()) cfg["ablate"] = flags.ablate_col;
    log_config(cfg, flags);

    auto table = clwe::load_feature_table(flags.table, flags.target_col);
    std::optional<std::string> ablate;
    if (!flags.ablate_col.empty()) ablate = flags.ablate_col;
    auto res = clwe::ablation_regression(table, ablate);

    std::ostringstream tsv;
    clwe::write_regression_tsv(res, tsv);
    write_text_file(flags.out, with_config_comment(cfg, tsv.str()));
    std::cerr << "clwe ablate: R^2 = " << res.r_squared << " -> " << flags.out << "\n";
    return 0;
}

int run_sweep(const CommonFlags& flags) {
    if (flags.manifest.empty()) throw clwe::InputError("--manifest is required");
    json cfg = base_config("sweep", flags);
    cfg["manifest"] = flags.manifest;
    cfg["ks"] = flags.ks;
    cfg["ts"] = flags.ts;
    cfg["knn"] = flags.knn;
    cfg["limit"] = flags.limit;
    log_config(cfg, flags);

    // manifest rows: <score> <lang=path> <lang=path> [...]
    std::ifstream in(flags.manifest);
    if (!in) throw clwe::InputError("cannot open manifest: " + flags.manifest);
    std::vector<clwe::EmbeddingSpace> spaces;
    std::vector<double> scores;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        clwe::detail::strip_cr(line);
        if (!line.empty() && line[0] == '#') continue;
        auto toks = clwe::detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() < 3)
            throw clwe::InputError(flags.manifest + ":" + std::to_string(line_no) +
                                   ": expected <score> and at least two lang=path entries");
        scores.push_back(clwe::detail::parse_double(toks[0], line_no, flags.manifest));
        std::vector<clwe::EmbeddingSpace> parts;
        for (std::size_t c = 1; c < toks.size(); ++c) {
            auto [lang, path] = parse_lang_path(std::string(toks[c]));
            parts.push_back(load_preprocessed(lang, path, flags));
        }
        spaces.push_back(clwe::merge_spaces(parts));
    }

    clwe::SweepOptions opts;
    opts.backend = parse_backend(flags.knn);
    opts.seed = flags.seed;
    opts.threads = flags.threads;
    opts.limit = flags.limit;
    auto grid = clwe::sweep(spaces, parse_size_list(flags.ks, "--ks"),
                            parse_size_list(flags.ts, "--ts"), scores, opts);

    std::ostringstream tsv;
    clwe::write_sweep_tsv(grid, tsv);
    write_text_file(flags.out, with_config_comment(cfg, tsv.str()));
    std::cerr << "clwe sweep: " << grid.size() << " cells over " << spaces.size()
              << " embeddings -> " << flags.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-lingual word embedding diagnostics: graph modularity, CSLS/BLI, "
                 "Procrustes refinement"};
    app.require_subcommand(1);
    CommonFlags flags;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", flags.seed, "RNG seed (RP forests)")->capture_default_str();
        cmd->add_option("--threads", flags.threads,
                        "worker threads, 0 = machine parallelism (never changes output bytes)")
            ->capture_default_str();
        cmd->add_option("--preprocess", flags.preprocess_chain,
                        "comma list of unit|center, or none")
            ->capture_default_str();
        cmd->add_flag("--lowercase", flags.lowercase, "ASCII-lowercase words at load time");
        cmd->add_option("--out", flags.out, "output path (or prefix for multi-file commands)")
            ->required();
    };

    auto* mod = app.add_subcommand("modularity", "normalized language modularity of a kNN graph");
    mod->add_option("--emb", flags.emb, "embedding file as lang=path (repeat per language)")
        ->required();
    mod->add_option("--k", flags.k, "neighbors per node")->capture_default_str();
    mod->add_option("--trees", flags.trees, "RP trees for --knn forest")->capture_default_str();
    mod->add_option("--knn", flags.knn, "kNN backend: exact or forest")->capture_default_str();
    mod->add_option("--limit", flags.limit, "most frequent words kept per language, 0 = all")
        ->capture_default_str();
    mod->add_option("--symmetrize", flags.symmetrize, "edge symmetrization: union or mutual")
        ->capture_default_str();
    mod->add_option("--edges", flags.edges, "also export the edge list TSV here");
    add_common(mod);

    auto* bli = app.add_subcommand("bli", "bilingual lexicon induction P@1 with CSLS");
    bli->add_option("--src", flags.src, "source embeddings as lang=path")->required();
    bli->add_option("--tgt", flags.tgt, "target embeddings as lang=path")->required();
    bli->add_option("--lexicon", flags.lexicon, "test lexicon (two tokens per line)")->required();
    bli->add_option("--exclude", flags.exclude, "pairs to remove from the test lexicon");
    bli->add_option("--mapping", flags.mapping, "mapping file to apply to the source");
    bli->add_option("--kappa", flags.kappa, "CSLS neighborhood size")->capture_default_str();
    bli->add_option("--trees", flags.trees, "RP trees for very large vocabularies")
        ->capture_default_str();
    bli->add_option("--limit", flags.limit, "most frequent words kept per language, 0 = all")
        ->capture_default_str();
    add_common(bli);

    auto* refine = app.add_subcommand("refine", "iterative Procrustes refinement");
    refine->add_option("--src", flags.src, "source embeddings as lang=path")->required();
    refine->add_option("--tgt", flags.tgt, "target embeddings as lang=path")->required();
    refine->add_option("--metric", flags.metric, "validation metric: csls10k or mod10k")
        ->required();
    refine->add_option("--epochs", flags.epochs, "refinement epochs")->capture_default_str();
    refine->add_option("--mapping", flags.mapping, "initial mapping file (default identity)");
    refine->add_option("--lexicon", flags.lexicon, "seed lexicon for a Procrustes start");
    refine->add_option("--k", flags.k, "graph neighbors for mod10k")->capture_default_str();
    refine->add_option("--kappa", flags.kappa, "CSLS neighborhood size")->capture_default_str();
    refine->add_option("--limit", flags.limit, "frequency cutoff for the validation metrics")
        ->capture_default_str();
    refine->add_option("--trees", flags.trees, "RP trees for --knn forest")->capture_default_str();
    refine->add_option("--knn", flags.knn, "kNN backend: exact or forest")->capture_default_str();
    add_common(refine);

    auto* correlate = app.add_subcommand("correlate", "pearson + spearman of two table columns");
    correlate->add_option("--table", flags.table, "TSV with a header row")->required();
    correlate->add_option("--x", flags.x_col, "first column name")->required();
    correlate->add_option("--y", flags.y_col, "second column name")->required();
    add_common(correlate);

    auto* ablate = app.add_subcommand("ablate", "standardized-feature regression ablation");
    ablate->add_option("--table", flags.table, "TSV with a header row")->required();
    ablate->add_option("--target", flags.target_col, "target column name")->required();
    ablate->add_option("--ablate", flags.ablate_col, "feature column to drop");
    add_common(ablate);

    auto* sweep = app.add_subcommand("sweep", "modularity/correlation grid over k and t");
    sweep->add_option("--manifest", flags.manifest,
                      "TSV rows: <score> <lang=path> <lang=path> [...]")
        ->required();
    sweep->add_option("--ks", flags.ks, "comma list of k values")->capture_default_str();
    sweep->add_option("--ts", flags.ts, "comma list of tree counts")->capture_default_str();
    sweep->add_option("--knn", flags.knn, "kNN backend: exact or forest")->capture_default_str();
    sweep->add_option("--limit", flags.limit, "frequency cutoff per language, 0 = all")
        ->capture_default_str();
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(mod)) return run_modularity(flags);
        if (app.got_subcommand(bli)) return run_bli(flags);
        if (app.got_subcommand(refine)) return run_refine(flags);
        if (app.got_subcommand(correlate)) return run_correlate(flags);
        if (app.got_subcommand(ablate)) return run_ablate(flags);
        if (app.got_subcommand(sweep)) return run_sweep(flags);
    } catch (const clwe::Error& e) {
        std::cerr << "clwe: error: " << e.what() << "\n";
        return e.kind() == clwe::Error::Kind::degenerate ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "clwe: error: " << e.what() << "\n";
        return 2;
    }
    return 2;  // unreachable with require_subcommand(1)
}
