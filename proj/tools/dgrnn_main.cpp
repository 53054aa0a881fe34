#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dgrnn/cli.hpp"

namespace {

// Config file first, then flag overrides, so a single versionable file plus
// a handful of reproducibility knobs fully determine a run.
dgrnn::RunConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return dgrnn::RunConfig{};
    return dgrnn::parse_run_config(config_path);
}

struct CommonFlags {
    std::string config_path;
    std::string seed;
    std::string variant;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "key=value run configuration file");
        cmd->add_option("--seed", seed, "override the config seed");
        cmd->add_option("--variant", variant, "override the model variant (s|sm|smd|full)");
    }

    dgrnn::RunConfig resolve() const {
        dgrnn::RunConfig cfg = load_config(config_path);
        if (!seed.empty()) dgrnn::apply_config_key(cfg, "seed", seed);
        if (!variant.empty()) dgrnn::apply_config_key(cfg, "variant", variant);
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic-graph recurrent traffic forecaster"};
    app.require_subcommand(1);

    std::string values_path, edges_path, bundle_dir, out_dir, ckpt_path, out_csv, split_name;
    std::size_t anchor_t = 0;
    std::vector<std::string> report_inputs;

    CommonFlags ingest_flags, synth_flags, train_flags;

    CLI::App* ingest = app.add_subcommand("ingest", "preprocess a raw flow matrix + edge list");
    ingest->add_option("values", values_path, "L x N flow CSV")->required();
    ingest->add_option("edges", edges_path, "edge list CSV (from,to[,cost])")->required();
    ingest->add_option("out", out_dir, "bundle output directory")->required();
    ingest_flags.attach(ingest);

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset bundle");
    synth->add_option("out", out_dir, "bundle output directory")->required();
    synth_flags.attach(synth);

    CLI::App* train = app.add_subcommand("train", "train a model on a bundle");
    train->add_option("bundle", bundle_dir, "dataset bundle directory")->required();
    train->add_option("out", out_dir, "run output directory")->required();
    train_flags.attach(train);

    CLI::App* eval = app.add_subcommand("eval", "per-horizon metrics for a checkpoint");
    eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    eval->add_option("bundle", bundle_dir, "dataset bundle directory")->required();
    eval->add_option("--split", split_name, "train|val|test")->default_val("test");
    eval->add_option("-o,--out", out_csv, "metric CSV path")->required();

    CLI::App* predict = app.add_subcommand("predict", "forecast the window after an anchor step");
    predict->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    predict->add_option("bundle", bundle_dir, "dataset bundle directory")->required();
    predict->add_option("anchor", anchor_t, "anchor time step t")->required();
    predict->add_option("-o,--out", out_csv, "forecast CSV path")->required();

    CLI::App* report = app.add_subcommand("report", "collate metric CSVs into one table");
    report->add_option("inputs", report_inputs, "metric CSVs, optionally label:path")->required();
    report->add_option("-o,--out", out_csv, "comparison CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    return dgrnn::cli::guarded(std::cerr, [&]() -> int {
        dgrnn::cli::resolve_threads();
        if (ingest->parsed()) {
            dgrnn::cli::cmd_ingest(values_path, edges_path, out_dir, ingest_flags.resolve(),
                                   std::cout);
        } else if (synth->parsed()) {
            dgrnn::cli::cmd_synth(out_dir, synth_flags.resolve(), std::cout);
        } else if (train->parsed()) {
            const dgrnn::TrainResult r =
                dgrnn::cli::cmd_train(bundle_dir, out_dir, train_flags.resolve(), std::cout);
            if (r.aborted) return dgrnn::cli::kExitCompute;
        } else if (eval->parsed()) {
            dgrnn::cli::cmd_eval(ckpt_path, bundle_dir, split_name, out_csv, std::cout);
        } else if (predict->parsed()) {
            dgrnn::cli::cmd_predict(ckpt_path, bundle_dir, anchor_t, out_csv, std::cout);
        } else if (report->parsed()) {
            dgrnn::cli::cmd_report(report_inputs, out_csv, std::cout);
        }
        return dgrnn::cli::kExitOk;
    });
}
