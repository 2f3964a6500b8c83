#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "clwe/embedding.hpp"
#include "clwe/error.hpp"
#include "clwe/numeric.hpp"

namespace clwe {

// Dense d x d linear map applied to row vectors: y = x W. The orthogonal
// flag is a claim by whoever produced the matrix, checked by the tests via
// orthogonality_error.
struct MappingMatrix {
    std::size_t dim = 0;
    std::vector<double> w;  // row-major
    bool orthogonal = false;

    static MappingMatrix identity(std::size_t d) {
        MappingMatrix m;
        m.dim = d;
        m.w.assign(d * d, 0.0);
        for (std::size_t i = 0; i < d; ++i) m.w[i * d + i] = 1.0;
        m.orthogonal = true;
        return m;
    }

    double at(std::size_t i, std::size_t j) const { return w[i * dim + j]; }
};

inline void apply_mapping(const MappingMatrix& m, std::span<const double> x,
                          std::span<double> out) {
    for (std::size_t j = 0; j < m.dim; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.dim; ++i) s += x[i] * m.w[i * m.dim + j];
        out[j] = s;
    }
}

inline EmbeddingSpace map_space(const EmbeddingSpace& space, const MappingMatrix& m) {
    if (space.dim != m.dim)
        throw InputError("map_space: mapping dimension " + std::to_string(m.dim) +
                         " does not match space dimension " + std::to_string(space.dim));
    EmbeddingSpace out = space;
    std::vector<double> row(m.dim);
    for (std::size_t i = 0; i < space.size(); ++i) {
        apply_mapping(m, space.vector(i), row);
        std::copy(row.begin(), row.end(), out.data.begin() + i * m.dim);
    }
    return out;
}

inline MappingMatrix transpose(const MappingMatrix& m) {
    MappingMatrix t;
    t.dim = m.dim;
    t.orthogonal = m.orthogonal;
    t.w.resize(m.dim * m.dim);
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t j = 0; j < m.dim; ++j) t.w[j * m.dim + i] = m.w[i * m.dim + j];
    return t;
}

// max |W^T W - I|
inline double orthogonality_error(const MappingMatrix& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t j = 0; j < m.dim; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < m.dim; ++r) s += m.w[r * m.dim + i] * m.w[r * m.dim + j];
            double expect = i == j ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(s - expect));
        }
    return worst;
}

// Text format: header "d d", then one row per line with 17-significant-digit
// reals, space separated.
inline void save_mapping(const MappingMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write mapping file: " + path);
    out << m.dim << ' ' << m.dim << '\n';
    for (std::size_t i = 0; i < m.dim; ++i) {
        for (std::size_t j = 0; j < m.dim; ++j) {
            if (j) out << ' ';
            out << format17(m.at(i, j));
        }
        out << '\n';
    }
    if (!out) throw InputError("write failed: " + path);
}

inline MappingMatrix load_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open mapping file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    detail::strip_cr(line);
    auto header = detail::split_ws(line);
    std::size_t rows = 0, cols = 0;
    if (header.size() == 2) {
        std::from_chars(header[0].data(), header[0].data() + header[0].size(), rows);
        std::from_chars(header[1].data(), header[1].data() + header[1].size(), cols);
    }
    if (rows == 0 || rows != cols)
        throw InputError(path + ":1: malformed header, expected 'd d' with equal dimensions");
    MappingMatrix m;
    m.dim = rows;
    m.w.reserve(rows * cols);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != cols)
            throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(cols) + " values, got " + std::to_string(toks.size()));
        for (const auto& tok : toks) m.w.push_back(detail::parse_double(tok, line_no, path));
    }
    if (m.w.size() != rows * cols)
        throw InputError(path + ": expected " + std::to_string(rows) + " rows");
    m.orthogonal = orthogonality_error(m) <= 1e-8;
    return m;
}

}  // namespace clwe
