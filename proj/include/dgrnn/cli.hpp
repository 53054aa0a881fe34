#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dgrnn/bundle.hpp"
#include "dgrnn/checkpoint.hpp"
#include "dgrnn/config.hpp"
#include "dgrnn/csv.hpp"
#include "dgrnn/dataset.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/graph.hpp"
#include "dgrnn/model.hpp"
#include "dgrnn/training.hpp"

namespace dgrnn::cli {

// Exit codes: 0 success, 1 compute failure, 2 input/validation failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCompute = 1;
inline constexpr int kExitInput = 2;

/// DGRNN_OUT_DIR redirects all command outputs: directory arguments are
/// replaced wholesale, file arguments keep their basename under the override.
inline std::string resolve_out_dir(const std::string& dir) {
    if (const char* env = std::getenv("DGRNN_OUT_DIR")) return env;
    return dir;
}

inline std::string resolve_out_file(const std::string& path) {
    if (const char* env = std::getenv("DGRNN_OUT_DIR")) {
        return (std::filesystem::path(env) / std::filesystem::path(path).filename()).string();
    }
    return path;
}

/// DGRNN_THREADS is validated for forward compatibility; the numeric engine
/// currently runs single-threaded regardless of its value.
inline std::size_t resolve_threads() {
    const char* env = std::getenv("DGRNN_THREADS");
    if (!env) return 1;
    long n = 0;
    try {
        n = csvio::parse_long(env, -1);
    } catch (const parse_error&) {
        throw config_error("DGRNN_THREADS must be an integer, got '" + std::string(env) + "'");
    }
    if (n < 1) throw config_error("DGRNN_THREADS must be >= 1, got '" + std::string(env) + "'");
    return static_cast<std::size_t>(n);
}

namespace detail {

inline void log_bundle_summary(std::ostream& log, const Bundle& b) {
    log << b.series.n_nodes << " nodes, " << b.series.n_steps << " steps, " << b.n_windows
        << " windows (train " << b.split.train << ", val " << b.split.val << ", test "
        << b.split.test << ")\n";
    if (b.n_windows == 0) {
        log << "warning: series shorter than one week of history plus horizon; "
               "bundle has no training windows\n";
    }
}

inline RawSeries normalized_series(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    out.values = apply_zscore(series.values, stats);
    return out;
}

inline void require_match(const std::string& field, std::size_t ckpt_value,
                          std::size_t bundle_value) {
    if (ckpt_value != bundle_value) {
        throw config_error("checkpoint/bundle mismatch on " + field + ": checkpoint has " +
                           std::to_string(ckpt_value) + ", bundle has " +
                           std::to_string(bundle_value));
    }
}

/// Rebuilds the trained model from a checkpoint against a bundle's graph,
/// checking the dimension fields the two artifacts share.
inline Model restore_model(const Checkpoint& ckpt, const Bundle& bundle) {
    require_match("n_nodes", ckpt.model.n_nodes, bundle.series.n_nodes);
    require_match("steps_per_day", ckpt.resolution.steps_per_day, bundle.resolution.steps_per_day);
    require_match("history_len", ckpt.resolution.history_len, bundle.resolution.history_len);
    require_match("horizon", ckpt.resolution.horizon, bundle.resolution.horizon);
    Model model(ckpt.model, bundle.graph.normalized, /*init_seed=*/0);
    restore_parameters(model, ckpt);
    return model;
}

inline const std::vector<WindowSample>& pick_split(const DataSplit& split,
                                                   const std::string& name) {
    if (name == "train") return split.train;
    if (name == "val") return split.val;
    if (name == "test") return split.test;
    throw config_error("split must be train, val or test, got '" + name + "'");
}

/// One evaluation-report row; `horizon` is 1-based, 0 encodes the aggregate.
struct ReportRow {
    std::size_t horizon = 0;
    double mae = 0.0;
    double rmse = 0.0;
};

inline void write_metric_csv(const std::string& path, const MetricReport& rep) {
    std::ofstream out(path);
    if (!out) throw value_error("cannot open '" + path + "' for writing");
    out << "horizon,mae,rmse\n";
    for (std::size_t tau = 0; tau < rep.mae.size(); ++tau) {
        out << (tau + 1) << "," << csvio::fmt_double(rep.mae[tau]) << ","
            << csvio::fmt_double(rep.rmse[tau]) << "\n";
    }
    out << "aggregate," << csvio::fmt_double(rep.aggregate_mae) << ","
        << csvio::fmt_double(rep.aggregate_rmse) << "\n";
}

/// Parses a metric CSV back into per-horizon rows plus the aggregate row.
inline std::vector<ReportRow> read_metric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'");
    std::vector<ReportRow> rows;
    std::string line;
    long line_no = 0;
    bool saw_aggregate = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = csvio::trim(line);
        if (trimmed.empty()) continue;
        if (line_no == 1) {
            if (trimmed != "horizon,mae,rmse") {
                throw parse_error("'" + path + "' is not a metric report (bad header)", line_no);
            }
            continue;
        }
        const auto fields = csvio::split(trimmed);
        if (fields.size() != 3) {
            throw parse_error("expected horizon,mae,rmse in '" + path + "'", line_no);
        }
        ReportRow row;
        if (fields[0] == "aggregate") {
            saw_aggregate = true;
        } else {
            if (saw_aggregate) {
                throw parse_error("horizon row after aggregate in '" + path + "'", line_no);
            }
            const long h = csvio::parse_long(fields[0], line_no);
            if (h < 1) throw parse_error("horizon must be >= 1 in '" + path + "'", line_no);
            row.horizon = static_cast<std::size_t>(h);
        }
        row.mae = csvio::parse_double(fields[1], line_no);
        row.rmse = csvio::parse_double(fields[2], line_no);
        rows.push_back(row);
    }
    if (!saw_aggregate) throw parse_error("'" + path + "' has no aggregate row");
    return rows;
}

} // namespace detail

/// Reads a raw flow matrix and an edge list, fills observation gaps, fits
/// normalization statistics on the training prefix, and writes the dataset
/// bundle. Rerunning over the same inputs is byte-identical.
inline void cmd_ingest(const std::string& values_path, const std::string& edges_path,
                       const std::string& out_dir, const RunConfig& cfg, std::ostream& log) {
    const RawSeries raw = load_pems(values_path);
    const RawSeries clean = interpolate_missing(raw);
    StaticGraph graph = load_graph(edges_path, clean.n_nodes);
    Bundle b = finalize_bundle(clean, std::move(graph), cfg.resolution(), "ingest");
    b.seed = cfg.seed;
    const std::string dir = resolve_out_dir(out_dir);
    write_bundle(dir, b);
    detail::log_bundle_summary(log, b);
    log << "bundle written to " << dir << "\n";
}

/// Generates the synthetic diffusion+seasonal dataset and writes it as a
/// bundle. Fully determined by the config seed.
inline void cmd_synth(const std::string& out_dir, const RunConfig& cfg, std::ostream& log) {
    const ResolutionConfig res = cfg.resolution();
    StaticGraph graph = path_graph(cfg.synth_nodes);
    RawSeries series = synth_generate(graph, res, cfg.synth());
    Bundle b = finalize_bundle(std::move(series), std::move(graph), res, "synth");
    b.seed = cfg.seed;
    b.regime_switch = cfg.synth_regime_switch;
    const std::string dir = resolve_out_dir(out_dir);
    write_bundle(dir, b);
    detail::log_bundle_summary(log, b);
    log << "bundle written to " << dir << "\n";
}

/// Trains on a bundle and writes checkpoint.ckpt plus history.csv under
/// out_dir. Returns the training result; a divergence abort is the caller's
/// cue for a compute-failure exit.
inline TrainResult cmd_train(const std::string& bundle_dir, const std::string& out_dir,
                             const RunConfig& cfg, std::ostream& log) {
    const Bundle b = load_bundle(bundle_dir);
    if (b.n_windows == 0) {
        throw value_error("bundle '" + bundle_dir + "' has no training windows");
    }
    const RawSeries norm = detail::normalized_series(b.series, b.stats);
    const DataSplit split = split_windows(build_windows(norm, b.resolution), b.stats);

    const ModelConfig mcfg = cfg.model(b.series.n_nodes);
    Model model(mcfg, b.graph.normalized, cfg.seed);
    log << "variant: " << variant_name(mcfg.variant) << "\n";
    log << "training on " << split.train.size() << " windows, validating on " << split.val.size()
        << "\n";

    const TrainResult result = train(model, split, cfg.train());

    const std::string dir = resolve_out_dir(out_dir);
    std::filesystem::create_directories(dir);
    const std::filesystem::path root(dir);
    save_checkpoint((root / "checkpoint.ckpt").string(), make_checkpoint(model, b.resolution, b.stats));
    {
        std::ofstream hist(root / "history.csv");
        hist << "epoch,train_loss,val_mae,eps\n";
        for (const EpochRow& row : result.history) {
            hist << row.epoch << "," << csvio::fmt_double(row.train_loss) << ","
                 << csvio::fmt_double(row.val_mae) << "," << csvio::fmt_double(row.eps) << "\n";
        }
    }
    if (result.aborted) {
        log << "training aborted on non-finite loss; best parameters kept\n";
    } else if (result.early_stopped) {
        log << "early stop after epoch " << result.history.size() << "\n";
    }
    log << "best epoch " << result.best_epoch << ", val MAE "
        << csvio::fmt_double(result.best_val_mae) << "\n";
    log << "checkpoint and history written to " << dir << "\n";
    return result;
}

/// Evaluates a checkpoint on one split of a bundle and writes the
/// per-horizon metric CSV (one row per step, then the aggregate row).
inline MetricReport cmd_eval(const std::string& ckpt_path, const std::string& bundle_dir,
                             const std::string& split_name, const std::string& out_csv,
                             std::ostream& log) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Bundle b = load_bundle(bundle_dir);
    const Model model = detail::restore_model(ckpt, b);
    const RawSeries norm = detail::normalized_series(b.series, ckpt.stats);
    const DataSplit split = split_windows(build_windows(norm, b.resolution), ckpt.stats);
    const std::vector<WindowSample>& windows = detail::pick_split(split, split_name);
    if (windows.empty()) throw value_error("split '" + split_name + "' is empty");

    const MetricReport rep = evaluate(model, windows, ckpt.stats);
    const std::string path = resolve_out_file(out_csv);
    detail::write_metric_csv(path, rep);
    log << split_name << " split, " << windows.size() << " windows: aggregate MAE "
        << csvio::fmt_double(rep.aggregate_mae) << ", RMSE "
        << csvio::fmt_double(rep.aggregate_rmse) << "\n";
    log << "report written to " << path << "\n";
    return rep;
}

/// Forecasts the T steps after anchor t and writes the de-normalized T x N
/// matrix. The anchor must have a full week of history behind it.
inline Tensor cmd_predict(const std::string& ckpt_path, const std::string& bundle_dir,
                          std::size_t t, const std::string& out_csv, std::ostream& log) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Bundle b = load_bundle(bundle_dir);
    const Model model = detail::restore_model(ckpt, b);
    const RawSeries norm = detail::normalized_series(b.series, ckpt.stats);
    const WindowSample w = make_window(norm, b.resolution, t);
    const Tensor forecast = invert_zscore(model.predict(w), ckpt.stats);
    const std::string path = resolve_out_file(out_csv);
    csvio::write_matrix(path, forecast);
    log << "forecast for anchor t=" << t << " (" << forecast.dim(0) << " steps x "
        << forecast.dim(1) << " nodes) written to " << path << "\n";
    return forecast;
}

/// Collates evaluation reports into one table, columns fixed as
/// variant,mae,rmse. Inputs are `label:path` pairs; a bare path labels the
/// row with the file stem. Rows keep input order.
inline void cmd_report(const std::vector<std::string>& inputs, const std::string& out_csv,
                       std::ostream& log) {
    if (inputs.empty()) throw config_error("report: need at least one metric CSV");
    struct Entry {
        std::string label;
        std::vector<detail::ReportRow> rows;
    };
    std::vector<Entry> entries;
    for (const std::string& input : inputs) {
        Entry e;
        std::string path = input;
        const auto colon = input.find(':');
        if (colon != std::string::npos && colon > 0) {
            e.label = input.substr(0, colon);
            path = input.substr(colon + 1);
        } else {
            e.label = std::filesystem::path(input).stem().string();
        }
        e.rows = detail::read_metric_csv(path);
        if (!entries.empty() && e.rows.size() != entries.front().rows.size()) {
            throw value_error("report: incompatible horizons: '" + entries.front().label +
                              "' has " + std::to_string(entries.front().rows.size() - 1) +
                              " rows, '" + e.label + "' has " + std::to_string(e.rows.size() - 1));
        }
        entries.push_back(std::move(e));
    }
    const std::string path = resolve_out_file(out_csv);
    std::ofstream out(path);
    if (!out) throw value_error("cannot open '" + path + "' for writing");
    out << "variant,mae,rmse\n";
    for (const Entry& e : entries) {
        const detail::ReportRow& agg = e.rows.back();  // parser guarantees aggregate last
        out << e.label << "," << csvio::fmt_double(agg.mae) << "," << csvio::fmt_double(agg.rmse)
            << "\n";
        log << e.label << ": MAE " << csvio::fmt_double(agg.mae) << ", RMSE "
            << csvio::fmt_double(agg.rmse) << "\n";
    }
    log << "comparison written to " << path << "\n";
}

/// Maps exceptions onto the documented exit codes.
template <typename F>
inline int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const config_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const parse_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const value_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const shape_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitCompute;
    }
}

} // namespace dgrnn::cli
