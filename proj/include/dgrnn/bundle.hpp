#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dgrnn/csv.hpp"
#include "dgrnn/dataset.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/graph.hpp"

namespace dgrnn {

/// A preprocessed dataset directory:
///   series.csv  cleaned raw-scale values, L x N
///   mask.csv    observation mask, L x N
///   edges.csv   undirected edge list with costs
///   meta.json   dimensions, resolution, split sizes, normalization stats
struct Bundle {
    RawSeries series;  // cleaned (gaps filled), raw scale
    StaticGraph graph;
    ResolutionConfig resolution;
    NormStats stats;
    SplitSizes split;
    std::size_t n_windows = 0;
    bool regime_switch = false;
    std::uint64_t seed = 0;
    std::string source;  // "ingest" or "synth"
};

/// Derives windows/split/stats from a cleaned series. With too few steps the
/// bundle has zero windows (callers warn; training refuses).
inline Bundle finalize_bundle(RawSeries series, StaticGraph graph, const ResolutionConfig& res,
                              const std::string& source) {
    Bundle b;
    b.resolution = res;
    b.source = source;
    bool short_series = false;
    const auto windows = build_windows(series, res, &short_series);
    b.n_windows = windows.size();
    if (!windows.empty()) {
        b.split = split_622(windows.size());
        b.stats = fit_zscore(train_block(series, res, b.split.train));
    } else {
        b.split = SplitSizes{};
        b.stats = NormStats{0.0, 1.0};  // degenerate bundle, not trainable
    }
    b.series = std::move(series);
    b.graph = std::move(graph);
    return b;
}

inline void write_bundle(const std::string& dir, const Bundle& b) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path root(dir);
    csvio::write_matrix((root / "series.csv").string(), b.series.values);
    csvio::write_matrix((root / "mask.csv").string(), b.series.missing_mask);
    {
        std::ofstream out(root / "edges.csv");
        out << "from,to,cost\n";
        for (const Edge& e : b.graph.edges) {
            out << e.from << "," << e.to << "," << csvio::fmt_double(e.cost) << "\n";
        }
    }
    nlohmann::json meta{
        {"n_nodes", b.series.n_nodes},
        {"n_steps", b.series.n_steps},
        {"step_minutes", b.series.step_minutes},
        {"steps_per_day", b.resolution.steps_per_day},
        {"history_len", b.resolution.history_len},
        {"horizon", b.resolution.horizon},
        {"n_windows", b.n_windows},
        {"split", {{"train", b.split.train}, {"val", b.split.val}, {"test", b.split.test}}},
        {"stats", {{"mean", b.stats.mean}, {"std", b.stats.std_dev}}},
        {"regime_switch", b.regime_switch},
        {"seed", b.seed},
        {"source", b.source}};
    std::ofstream out(root / "meta.json");
    out << meta.dump(2) << "\n";
}

inline Bundle load_bundle(const std::string& dir) {
    const std::filesystem::path root(dir);
    std::ifstream meta_in(root / "meta.json");
    if (!meta_in) throw parse_error("bundle: cannot open '" + (root / "meta.json").string() + "'");
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("bundle: meta.json is not valid JSON: " + std::string(e.what()));
    }
    Bundle b;
    try {
        b.resolution.steps_per_day = meta.at("steps_per_day").get<std::size_t>();
        b.resolution.history_len = meta.at("history_len").get<std::size_t>();
        b.resolution.horizon = meta.at("horizon").get<std::size_t>();
        b.n_windows = meta.at("n_windows").get<std::size_t>();
        b.split.train = meta.at("split").at("train").get<std::size_t>();
        b.split.val = meta.at("split").at("val").get<std::size_t>();
        b.split.test = meta.at("split").at("test").get<std::size_t>();
        b.stats.mean = meta.at("stats").at("mean").get<double>();
        b.stats.std_dev = meta.at("stats").at("std").get<double>();
        b.regime_switch = meta.at("regime_switch").get<bool>();
        b.seed = meta.at("seed").get<std::uint64_t>();
        b.source = meta.at("source").get<std::string>();
        b.series.step_minutes = meta.at("step_minutes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("bundle: meta.json field missing or mistyped: " + std::string(e.what()));
    }
    const std::size_t n_nodes = meta.at("n_nodes").get<std::size_t>();
    const std::size_t n_steps = meta.at("n_steps").get<std::size_t>();
    b.series.values = csvio::read_matrix((root / "series.csv").string());
    b.series.missing_mask = csvio::read_matrix((root / "mask.csv").string());
    b.series.n_steps = b.series.values.dim(0);
    b.series.n_nodes = b.series.values.dim(1);
    if (b.series.n_steps != n_steps || b.series.n_nodes != n_nodes) {
        throw parse_error("bundle: series.csv is " + std::to_string(b.series.n_steps) + "x" +
                          std::to_string(b.series.n_nodes) + " but meta.json declares " +
                          std::to_string(n_steps) + "x" + std::to_string(n_nodes));
    }
    check_same_shape(b.series.values, b.series.missing_mask, "bundle mask");
    b.graph = load_graph((root / "edges.csv").string(), n_nodes);
    return b;
}

} // namespace dgrnn
