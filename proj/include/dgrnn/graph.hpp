#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dgrnn/csv.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/tensor.hpp"

namespace dgrnn {

struct Edge {
    std::size_t from;
    std::size_t to;
    double cost;
};

/// Undirected road-network graph: binary symmetric adjacency with zero
/// diagonal plus its row-normalized form. Immutable after construction.
struct StaticGraph {
    std::size_t n_nodes = 0;
    Tensor adjacency;   // [N x N], entries in {0, 1}
    Tensor normalized;  // degree^-1 * adjacency, zero-degree rows stay zero
    std::vector<Edge> edges;  // parsed records; costs kept as metadata
};

/// Row-normalizes a binary symmetric adjacency by out-degree. Rows of
/// isolated nodes stay all-zero; no self-loops are injected, since the
/// zero-hop term of the diffusion convolution already carries each node's
/// own signal.
inline Tensor normalize_adjacency(const Tensor& a) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
        throw shape_error("normalize_adjacency: expected square matrix, got " + shape_str(a.shape()));
    }
    const std::size_t n = a.dim(0);
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < n && bad.size() < 8; ++i) {
        for (std::size_t j = 0; j < n && bad.size() < 8; ++j) {
            const double v = a.at(i, j);
            if (v != 0.0 && v != 1.0) {
                bad.push_back("(" + std::to_string(i) + "," + std::to_string(j) + ") non-binary");
            } else if (i == j && v != 0.0) {
                bad.push_back("(" + std::to_string(i) + "," + std::to_string(j) + ") nonzero diagonal");
            } else if (v != a.at(j, i)) {
                bad.push_back("(" + std::to_string(i) + "," + std::to_string(j) + ") asymmetric");
            }
        }
    }
    if (!bad.empty()) {
        std::ostringstream os;
        os << "normalize_adjacency: invalid adjacency at";
        for (const auto& s : bad) os << ' ' << s;
        throw value_error(os.str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 0.0;
        for (std::size_t j = 0; j < n; ++j) degree += a.at(i, j);
        if (degree == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / degree;
    }
    return out;
}

inline StaticGraph make_graph(std::size_t n_nodes, Tensor adjacency, std::vector<Edge> edges = {}) {
    StaticGraph g;
    g.n_nodes = n_nodes;
    g.normalized = normalize_adjacency(adjacency);
    g.adjacency = std::move(adjacency);
    g.edges = std::move(edges);
    return g;
}

/// Loads an edge-list file: one header line, then comma-separated
/// `from,to[,cost]` records. Edges are undirected; duplicates are idempotent
/// and self-loop records are ignored. Costs are retained as metadata only.
inline StaticGraph load_graph(const std::string& path, std::size_t n_nodes) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'");
    Tensor a({n_nodes, n_nodes});
    std::vector<Edge> edges;
    std::string line;
    long line_no = 0;
    bool header_skipped = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (csvio::trim(line).empty()) continue;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        const auto fields = csvio::split(line);
        if (fields.size() != 2 && fields.size() != 3) {
            throw parse_error("expected from,to[,cost], got " + std::to_string(fields.size()) +
                                  " fields",
                              line_no);
        }
        const long from = csvio::parse_long(fields[0], line_no);
        const long to = csvio::parse_long(fields[1], line_no);
        if (from < 0 || to < 0 || from >= static_cast<long>(n_nodes) ||
            to >= static_cast<long>(n_nodes)) {
            throw parse_error("node id out of range [0, " + std::to_string(n_nodes) + ")", line_no);
        }
        const double cost = fields.size() == 3 ? csvio::parse_double(fields[2], line_no) : 1.0;
        edges.push_back({static_cast<std::size_t>(from), static_cast<std::size_t>(to), cost});
        if (from == to) continue;
        a.at(static_cast<std::size_t>(from), static_cast<std::size_t>(to)) = 1.0;
        a.at(static_cast<std::size_t>(to), static_cast<std::size_t>(from)) = 1.0;
    }
    return make_graph(n_nodes, std::move(a), std::move(edges));
}

/// Chain 0-1-2-...-(n-1); the default synthetic-road layout.
inline StaticGraph path_graph(std::size_t n_nodes) {
    Tensor a({n_nodes, n_nodes});
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < n_nodes; ++i) {
        a.at(i, i + 1) = 1.0;
        a.at(i + 1, i) = 1.0;
        edges.push_back({i, i + 1, 1.0});
    }
    return make_graph(n_nodes, std::move(a), std::move(edges));
}

} // namespace dgrnn
