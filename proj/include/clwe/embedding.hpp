#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "clwe/error.hpp"
#include "clwe/numeric.hpp"

namespace clwe {

// A set of words with language tags and dense vectors, immutable once built.
// Word identity is the pair (language, surface string): the same string in
// two languages is two distinct entries. `rank` is the 0-based position of
// the word within its own language, i.e. its frequency rank when the source
// file is frequency-sorted (the usual .vec convention).
struct EmbeddingSpace {
    std::size_t dim = 0;
    std::vector<std::string> words;
    std::vector<std::string> langs;
    std::vector<std::size_t> ranks;
    std::vector<double> data;  // row-major, words.size() x dim
    std::size_t duplicates_dropped = 0;

    std::size_t size() const { return words.size(); }

    std::span<const double> vector(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }

    std::optional<std::size_t> find(std::string_view lang, std::string_view word) const {
        std::string key;
        key.reserve(lang.size() + word.size() + 1);
        key.append(lang);
        key.push_back('\x1f');
        key.append(word);
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    // Appends one entry; callers must finish with rebuild_index().
    void push(std::string word, std::string lang, std::size_t rank, std::span<const double> vec) {
        words.push_back(std::move(word));
        langs.push_back(std::move(lang));
        ranks.push_back(rank);
        data.insert(data.end(), vec.begin(), vec.end());
    }

    void rebuild_index() {
        index_.clear();
        index_.reserve(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) {
            std::string key = langs[i];
            key.push_back('\x1f');
            key += words[i];
            index_.emplace(std::move(key), i);
        }
    }

    // Language codes in first-appearance order.
    std::vector<std::string> languages() const {
        std::vector<std::string> out;
        for (const auto& l : langs)
            if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
        return out;
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct Lexicon {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string source_language;
    std::string target_language;
};

enum class PreprocessStep { unit, center };

namespace detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no, const std::string& path) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw InputError(path + ":" + std::to_string(line_no) + ": not a number: '" +
                         std::string(tok) + "'");
    if (!std::isfinite(v))
        throw InputError(path + ":" + std::to_string(line_no) + ": non-finite value '" +
                         std::string(tok) + "'");
    return v;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

// Reads word2vec/fastText text format: "vocab dim" header, then one word and
// dim decimal values per line. Duplicate words keep the first occurrence and
// are tallied in duplicates_dropped; ranks stay contiguous over kept words.
inline EmbeddingSpace load_embeddings(const std::string& path, const std::string& language,
                                      bool lowercase = false) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open embedding file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    detail::strip_cr(line);
    auto header = detail::split_ws(line);
    if (header.size() != 2)
        throw InputError(path + ":1: malformed header, expected 'vocab dim'");
    std::size_t vocab = 0, dim = 0;
    {
        auto [p1, e1] = std::from_chars(header[0].data(), header[0].data() + header[0].size(), vocab);
        auto [p2, e2] = std::from_chars(header[1].data(), header[1].data() + header[1].size(), dim);
        if (e1 != std::errc{} || e2 != std::errc{} ||
            p1 != header[0].data() + header[0].size() || p2 != header[1].data() + header[1].size())
            throw InputError(path + ":1: malformed header, expected 'vocab dim'");
    }
    if (vocab == 0) throw InputError(path + ": empty vocabulary");
    if (dim == 0) throw InputError(path + ": dimension must be >= 1");

    EmbeddingSpace space;
    space.dim = dim;
    space.words.reserve(vocab);
    space.data.reserve(vocab * dim);

    std::unordered_set<std::string> seen;
    seen.reserve(vocab);
    std::vector<double> row(dim);
    std::size_t line_no = 1;
    std::size_t rows_read = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (rows_read == vocab)
            throw InputError(path + ":" + std::to_string(line_no) + ": more rows than the " +
                             std::to_string(vocab) + " declared in the header");
        if (toks.size() != dim + 1)
            throw InputError(path + ":" + std::to_string(line_no) + ": expected 1 word + " +
                             std::to_string(dim) + " values, got " + std::to_string(toks.size()) +
                             " fields");
        std::string word(toks[0]);
        if (lowercase) word = detail::ascii_lower(word);
        for (std::size_t d = 0; d < dim; ++d)
            row[d] = detail::parse_double(toks[d + 1], line_no, path);
        ++rows_read;
        if (!seen.insert(word).second) {
            ++space.duplicates_dropped;
            continue;
        }
        space.push(std::move(word), language, space.words.size(), row);
    }
    if (rows_read != vocab)
        throw InputError(path + ": header declares " + std::to_string(vocab) + " rows, found " +
                         std::to_string(rows_read));
    space.rebuild_index();
    return space;
}

// Writer counterpart; emits "vocab dim" and 6-decimal fixed-point values so
// load(save(x)) is bit-identical for 6-decimal data. Single-language only,
// since the format has no language column.
inline void save_embeddings(const EmbeddingSpace& space, const std::string& path) {
    if (space.languages().size() > 1)
        throw InputError("save_embeddings: refusing to flatten a multi-language space");
    std::ofstream out(path);
    if (!out) throw InputError("cannot write embedding file: " + path);
    out << space.size() << ' ' << space.dim << '\n';
    for (std::size_t i = 0; i < space.size(); ++i) {
        out << space.words[i];
        auto v = space.vector(i);
        for (double x : v) out << ' ' << format6(x);
        out << '\n';
    }
    if (!out) throw InputError("write failed: " + path);
}

inline std::vector<PreprocessStep> parse_preprocess_chain(std::string_view spec) {
    std::vector<PreprocessStep> steps;
    if (spec.empty() || spec == "none") return steps;
    std::size_t start = 0;
    while (start <= spec.size()) {
        std::size_t comma = spec.find(',', start);
        std::string_view tok = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                  : comma - start);
        if (tok == "unit")
            steps.push_back(PreprocessStep::unit);
        else if (tok == "center")
            steps.push_back(PreprocessStep::center);
        else
            throw InputError("unknown preprocess step '" + std::string(tok) +
                             "' (expected unit or center)");
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return steps;
}

// Applies unit/center steps in order. `unit` divides each vector by its
// Euclidean norm; `center` subtracts the per-dimension mean over the space.
inline EmbeddingSpace preprocess(EmbeddingSpace space, std::span<const PreprocessStep> steps) {
    if (space.size() == 0) throw InputError("preprocess: empty space");
    std::size_t n = space.size();
    std::size_t d = space.dim;
    for (PreprocessStep step : steps) {
        if (step == PreprocessStep::unit) {
            for (std::size_t i = 0; i < n; ++i) {
                double nrm = norm(space.vector(i));
                if (nrm == 0.0)
                    throw InputError("preprocess: zero-norm vector for word '" + space.words[i] +
                                     "' (" + space.langs[i] + ")");
                for (std::size_t j = 0; j < d; ++j) space.data[i * d + j] /= nrm;
            }
        } else {
            std::vector<double> mean(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) mean[j] += space.data[i * d + j];
            for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) space.data[i * d + j] -= mean[j];
        }
    }
    return space;
}

inline EmbeddingSpace preprocess(EmbeddingSpace space, std::initializer_list<PreprocessStep> steps) {
    return preprocess(std::move(space), std::span<const PreprocessStep>(steps.begin(), steps.size()));
}

// Disjoint union of per-language spaces. Node identity stays (language, word),
// so cross-language homographs remain distinct; per-language ranks carry over.
inline EmbeddingSpace merge_spaces(std::span<const EmbeddingSpace> spaces) {
    if (spaces.empty()) throw InputError("merge_spaces: no spaces given");
    EmbeddingSpace merged;
    merged.dim = spaces[0].dim;
    std::unordered_set<std::string> langs_seen;
    for (const auto& s : spaces) {
        if (s.dim != merged.dim)
            throw InputError("merge_spaces: dimension mismatch (" + std::to_string(s.dim) +
                             " vs " + std::to_string(merged.dim) + ")");
        for (const auto& l : s.languages())
            if (!langs_seen.insert(l).second)
                throw InputError("merge_spaces: duplicate language code '" + l + "'");
        for (std::size_t i = 0; i < s.size(); ++i)
            merged.push(s.words[i], s.langs[i], s.ranks[i], s.vector(i));
        merged.duplicates_dropped += s.duplicates_dropped;
    }
    merged.rebuild_index();
    return merged;
}

// Keeps only entries of one language (ranks and order preserved).
inline EmbeddingSpace restrict_language(const EmbeddingSpace& space, std::string_view lang) {
    EmbeddingSpace out;
    out.dim = space.dim;
    for (std::size_t i = 0; i < space.size(); ++i)
        if (space.langs[i] == lang) out.push(space.words[i], space.langs[i], space.ranks[i], space.vector(i));
    out.rebuild_index();
    return out;
}

// Keeps the `limit` lowest-rank words of every language; limit 0 means all.
inline EmbeddingSpace restrict_top_frequent(const EmbeddingSpace& space, std::size_t limit) {
    if (limit == 0) return space;
    EmbeddingSpace out;
    out.dim = space.dim;
    for (std::size_t i = 0; i < space.size(); ++i)
        if (space.ranks[i] < limit) out.push(space.words[i], space.langs[i], space.ranks[i], space.vector(i));
    out.rebuild_index();
    return out;
}

// Two whitespace-separated tokens per line; order-preserving de-duplication.
inline Lexicon load_lexicon(const std::string& path, const std::string& src,
                            const std::string& tgt, bool lowercase = false) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lexicon file: " + path);
    Lexicon lex;
    lex.source_language = src;
    lex.target_language = tgt;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 2)
            throw InputError(path + ":" + std::to_string(line_no) + ": expected 2 tokens, got " +
                             std::to_string(toks.size()));
        std::string s(toks[0]), t(toks[1]);
        if (lowercase) {
            s = detail::ascii_lower(s);
            t = detail::ascii_lower(t);
        }
        std::string key = s + '\x1f' + t;
        if (seen.insert(std::move(key)).second) lex.pairs.emplace_back(std::move(s), std::move(t));
    }
    if (lex.pairs.empty()) throw InputError(path + ": empty lexicon");
    return lex;
}

// Removes from `lex` every (source, target) pair present in `exclude`.
inline Lexicon filter_lexicon(const Lexicon& lex, const Lexicon& exclude) {
    std::unordered_set<std::string> drop;
    drop.reserve(exclude.pairs.size());
    for (const auto& [s, t] : exclude.pairs) drop.insert(s + '\x1f' + t);
    Lexicon out;
    out.source_language = lex.source_language;
    out.target_language = lex.target_language;
    for (const auto& p : lex.pairs)
        if (!drop.count(p.first + '\x1f' + p.second)) out.pairs.push_back(p);
    return out;
}

}  // namespace clwe
