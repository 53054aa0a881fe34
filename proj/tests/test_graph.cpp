#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "dgrnn/graph.hpp"
#include "dgrnn/rng.hpp"

using namespace dgrnn;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    std::string path = std::string(::testing::TempDir()) + name;
    std::ofstream out(path);
    out << body;
    return path;
}

Tensor adj(std::size_t n, std::initializer_list<double> vals) {
    return Tensor({n, n}, std::vector<double>(vals));
}

} // namespace

TEST(NormalizeAdjacency, TwoNodeSymmetricUnchanged) {
    Tensor a = adj(2, {0, 1, 1, 0});
    Tensor norm = normalize_adjacency(a);
    EXPECT_EQ(norm, a);
}

TEST(NormalizeAdjacency, StarGraphRowsDividedByDegree) {
    Tensor a = adj(3, {0, 1, 1, 1, 0, 0, 1, 0, 0});
    Tensor norm = normalize_adjacency(a);
    Tensor expect = adj(3, {0, 0.5, 0.5, 1, 0, 0, 1, 0, 0});
    EXPECT_EQ(norm, expect);
}

TEST(NormalizeAdjacency, IsolatedNodeRowStaysZero) {
    Tensor a = adj(3, {0, 1, 0, 1, 0, 0, 0, 0, 0});
    Tensor norm = normalize_adjacency(a);
    EXPECT_DOUBLE_EQ(norm.at(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(norm.at(2, 1), 0.0);
    EXPECT_DOUBLE_EQ(norm.at(2, 2), 0.0);
    EXPECT_DOUBLE_EQ(norm.at(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(norm.at(1, 0), 1.0);
}

TEST(NormalizeAdjacency, PositiveDegreeRowsAreProbabilityVectors) {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform(0.0, 7.0));
        Tensor a = Tensor::zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (rng.bernoulli(0.4)) {
                    a.at(i, j) = 1.0;
                    a.at(j, i) = 1.0;
                }
            }
        }
        Tensor norm = normalize_adjacency(a);
        for (std::size_t i = 0; i < n; ++i) {
            double degree = 0.0, row_sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                degree += a.at(i, j);
                row_sum += norm.at(i, j);
                EXPECT_GE(norm.at(i, j), 0.0);
            }
            if (degree > 0.0) {
                EXPECT_NEAR(row_sum, 1.0, 1e-12);
            } else {
                EXPECT_DOUBLE_EQ(row_sum, 0.0);
            }
        }
    }
}

TEST(NormalizeAdjacency, NonSymmetricReportsIndices) {
    Tensor a = adj(2, {0, 1, 0, 0});
    try {
        normalize_adjacency(a);
        FAIL() << "expected value_error";
    } catch (const value_error& e) {
        EXPECT_NE(std::string(e.what()).find("(0,1)"), std::string::npos);
    }
}

TEST(NormalizeAdjacency, NonBinaryReportsIndices) {
    Tensor a = adj(2, {0, 0.5, 0.5, 0});
    try {
        normalize_adjacency(a);
        FAIL() << "expected value_error";
    } catch (const value_error& e) {
        EXPECT_NE(std::string(e.what()).find("(0,1)"), std::string::npos);
    }
}

TEST(NormalizeAdjacency, NonZeroDiagonalRejected) {
    Tensor a = adj(2, {1, 1, 1, 0});
    EXPECT_THROW(normalize_adjacency(a), value_error);
}

TEST(NormalizeAdjacency, NonSquareRejected) {
    Tensor a({2, 3});
    EXPECT_THROW(normalize_adjacency(a), shape_error);
}

TEST(LoadGraph, SingleEdgeTwoNodes) {
    std::string path = write_temp("edges_single.csv", "from,to\n0,1\n");
    StaticGraph g = load_graph(path, 2);
    EXPECT_EQ(g.adjacency, adj(2, {0, 1, 1, 0}));
    EXPECT_EQ(g.normalized, adj(2, {0, 1, 1, 0}));
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_EQ(g.edges[0].from, 0u);
    EXPECT_EQ(g.edges[0].to, 1u);
}

TEST(LoadGraph, DuplicateEdgeIdempotent) {
    std::string once = write_temp("edges_once.csv", "from,to\n0,1\n");
    std::string twice = write_temp("edges_twice.csv", "from,to\n0,1\n1,0\n");
    EXPECT_EQ(load_graph(once, 2).adjacency, load_graph(twice, 2).adjacency);
}

TEST(LoadGraph, RowOrderDoesNotMatter) {
    std::vector<std::string> rows = {"0,1", "1,2", "2,3", "0,3", "1,3"};
    std::string fwd = "from,to\n";
    for (const auto& r : rows) fwd += r + "\n";
    std::string rev = "from,to\n";
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) rev += *it + "\n";
    StaticGraph a = load_graph(write_temp("edges_fwd.csv", fwd), 4);
    StaticGraph b = load_graph(write_temp("edges_rev.csv", rev), 4);
    EXPECT_EQ(a.adjacency, b.adjacency);
    EXPECT_EQ(a.normalized, b.normalized);
}

TEST(LoadGraph, CostColumnKeptAsMetadata) {
    std::string path = write_temp("edges_cost.csv", "from,to,cost\n0,1,3.5\n");
    StaticGraph g = load_graph(path, 2);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_DOUBLE_EQ(g.edges[0].cost, 3.5);
    EXPECT_DOUBLE_EQ(g.adjacency.at(0, 1), 1.0);
}

TEST(LoadGraph, SelfLoopIgnored) {
    std::string path = write_temp("edges_loop.csv", "from,to\n1,1\n0,1\n");
    StaticGraph g = load_graph(path, 2);
    EXPECT_DOUBLE_EQ(g.adjacency.at(1, 1), 0.0);
    EXPECT_DOUBLE_EQ(g.adjacency.at(0, 1), 1.0);
}

TEST(LoadGraph, OutOfRangeNodeNamesLine) {
    std::string path = write_temp("edges_oob.csv", "from,to\n0,1\n0,5\n");
    try {
        load_graph(path, 2);
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(LoadGraph, MalformedRowNamesLine) {
    std::string path = write_temp("edges_bad.csv", "from,to\n0,1\nnot,a number\n");
    try {
        load_graph(path, 3);
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(LoadGraph, MissingFileThrows) {
    EXPECT_THROW(load_graph("/nonexistent/edges.csv", 2), parse_error);
}

TEST(PathGraph, ChainStructure) {
    StaticGraph g = path_graph(4);
    Tensor expect = adj(4, {0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0});
    EXPECT_EQ(g.adjacency, expect);
    EXPECT_DOUBLE_EQ(g.normalized.at(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(g.normalized.at(0, 1), 1.0);
}
