#pragma once

#include <stdexcept>
#include <string>

namespace dgrnn {

/// Tensor shape or dimension disagreement.
class shape_error : public std::runtime_error {
public:
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated value-level contract (non-finite input, bad domain, empty mask, ...).
class value_error : public std::runtime_error {
public:
    explicit value_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file. Carries the 1-based line (or row) number when known.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& msg, long line = -1)
        : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Invalid model/run configuration (unknown key, incompatible field, ...).
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dgrnn
