#pragma once

#include <stdexcept>
#include <string>

namespace clwe {

// All library failures derive from Error and carry a coarse category that
// maps directly onto the CLI exit codes: InputError -> 2, DegenerateError -> 3.
class Error : public std::runtime_error {
public:
    enum class Kind { input, degenerate };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Malformed files, mismatched dimensions, bad arguments.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(Kind::input, what) {}
};

// The requested quantity is mathematically undefined on this input
// (single-language graph, zero evaluable words, empty restriction, ...).
class DegenerateError : public Error {
public:
    explicit DegenerateError(const std::string& what) : Error(Kind::degenerate, what) {}
};

}  // namespace clwe
