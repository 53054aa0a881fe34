#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "dgrnn/errors.hpp"
#include "dgrnn/tensor.hpp"

namespace dgrnn::csvio {

inline std::vector<std::string> split(const std::string& line, char delim = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

/// Shortest representation that round-trips a double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& field, long line) {
    const std::string t = trim(field);
    if (t.empty()) throw parse_error("empty numeric field", line);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) {
        throw parse_error("malformed numeric field '" + t + "'", line);
    }
    return v;
}

inline long parse_long(const std::string& field, long line) {
    const std::string t = trim(field);
    if (t.empty()) throw parse_error("empty integer field", line);
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) {
        throw parse_error("malformed integer field '" + t + "'", line);
    }
    return v;
}

/// Reads a headerless numeric matrix. Empty fields and any spelling of
/// "nan" load as NaN. Every row must have the same width.
inline Tensor read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'");
    std::vector<double> data;
    std::size_t cols = 0, rows = 0;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (cols == 0) cols = fields.size();
        if (fields.size() != cols) {
            throw parse_error("row has " + std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(cols),
                              line_no);
        }
        for (const auto& f : fields) {
            const std::string t = trim(f);
            std::string lower = t;
            for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (t.empty() || lower == "nan") {
                data.push_back(std::nan(""));
            } else {
                data.push_back(parse_double(t, line_no));
            }
        }
        ++rows;
    }
    if (rows == 0) throw parse_error("'" + path + "' holds no data rows");
    return Tensor({rows, cols}, std::move(data));
}

inline void write_matrix(const std::string& path, const Tensor& m) {
    if (m.rank() != 2) throw shape_error("write_matrix: expected rank-2 tensor");
    std::ofstream out(path);
    if (!out) throw value_error("cannot write '" + path + "'");
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (j) out << ',';
            out << fmt_double(m.at(i, j));
        }
        out << '\n';
    }
}

} // namespace dgrnn::csvio
