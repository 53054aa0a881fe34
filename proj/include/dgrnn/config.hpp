#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "dgrnn/cell.hpp"
#include "dgrnn/csv.hpp"
#include "dgrnn/dataset.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/model.hpp"
#include "dgrnn/training.hpp"

namespace dgrnn {

/// Complete run configuration. Parsed from a key=value file; every key is
/// validated against the schema below and unknown keys are rejected.
struct RunConfig {
    // windowing
    std::size_t steps_per_day = 288;
    std::size_t history_len = 12;
    std::size_t horizon = 12;
    // model
    std::size_t attn_channels = 3;
    std::size_t hidden_dim = 32;
    std::size_t head_dim = 16;
    std::size_t n_heads = 3;
    std::size_t diffusion_steps = 3;
    std::string variant = "full";
    // training
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double gradient_clip_norm = 5.0;
    double tau = 2000.0;
    std::size_t patience = 15;
    std::uint64_t seed = 0;
    // synthetic generation
    std::size_t synth_nodes = 8;
    std::size_t synth_steps = 0;  // 0 = six weeks at steps_per_day
    double synth_alpha = 0.9;
    double synth_noise = 0.08;
    double synth_amp_lo = 2.0;
    double synth_amp_hi = 6.0;
    bool synth_regime_switch = false;

    ResolutionConfig resolution() const {
        ResolutionConfig res;
        res.steps_per_day = steps_per_day;
        res.history_len = history_len;
        res.horizon = horizon;
        res.validate();
        return res;
    }

    ModelConfig model(std::size_t n_nodes) const {
        ModelConfig m;
        m.n_nodes = n_nodes;
        m.history_len = history_len;
        m.horizon = horizon;
        m.attn_channels = attn_channels;
        m.hidden_dim = hidden_dim;
        m.head_dim = head_dim;
        m.n_heads = n_heads;
        m.diffusion_steps = diffusion_steps;
        m.variant = variant_from_name(variant);
        return m;
    }

    TrainConfig train() const {
        TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.learning_rate = learning_rate;
        t.gradient_clip_norm = gradient_clip_norm;
        t.tau = tau;
        t.seed = seed;
        t.patience = patience;
        t.validate();
        return t;
    }

    SynthConfig synth() const {
        SynthConfig s;
        s.n_steps = synth_steps == 0 ? 6 * 7 * steps_per_day : synth_steps;
        s.seed = seed;
        s.alpha = synth_alpha;
        s.noise_std = synth_noise;
        s.amp_lo = synth_amp_lo;
        s.amp_hi = synth_amp_hi;
        s.regime_switch = synth_regime_switch;
        return s;
    }
};

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& value) {
    const long v = csvio::parse_long(value, -1);
    if (v < 0) throw config_error("config: " + key + " must be non-negative, got " + value);
    return static_cast<std::size_t>(v);
}

inline double parse_positive(const std::string& key, const std::string& value) {
    const double v = csvio::parse_double(value, -1);
    if (!(v > 0.0)) throw config_error("config: " + key + " must be positive, got " + value);
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw config_error("config: " + key + " must be true/false, got " + value);
}

} // namespace detail

/// Applies one validated key. Shared by the file parser and flag overrides.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "steps_per_day") cfg.steps_per_day = detail::parse_size(key, value);
        else if (key == "history_len") cfg.history_len = detail::parse_size(key, value);
        else if (key == "horizon") cfg.horizon = detail::parse_size(key, value);
        else if (key == "attn_channels") cfg.attn_channels = detail::parse_size(key, value);
        else if (key == "hidden_dim") cfg.hidden_dim = detail::parse_size(key, value);
        else if (key == "head_dim") cfg.head_dim = detail::parse_size(key, value);
        else if (key == "n_heads") cfg.n_heads = detail::parse_size(key, value);
        else if (key == "diffusion_steps") cfg.diffusion_steps = detail::parse_size(key, value);
        else if (key == "variant") cfg.variant = variant_name(variant_from_name(value));
        else if (key == "epochs") cfg.epochs = detail::parse_size(key, value);
        else if (key == "batch_size") cfg.batch_size = detail::parse_size(key, value);
        else if (key == "learning_rate") cfg.learning_rate = detail::parse_positive(key, value);
        else if (key == "gradient_clip_norm") cfg.gradient_clip_norm = detail::parse_positive(key, value);
        else if (key == "tau") cfg.tau = detail::parse_positive(key, value);
        else if (key == "patience") cfg.patience = detail::parse_size(key, value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(csvio::parse_long(value, -1));
        else if (key == "synth_nodes") cfg.synth_nodes = detail::parse_size(key, value);
        else if (key == "synth_steps") cfg.synth_steps = detail::parse_size(key, value);
        else if (key == "synth_alpha") cfg.synth_alpha = csvio::parse_double(value, -1);
        else if (key == "synth_noise") cfg.synth_noise = csvio::parse_double(value, -1);
        else if (key == "synth_amp_lo") cfg.synth_amp_lo = csvio::parse_double(value, -1);
        else if (key == "synth_amp_hi") cfg.synth_amp_hi = csvio::parse_double(value, -1);
        else if (key == "synth_regime_switch") cfg.synth_regime_switch = detail::parse_bool(key, value);
        else throw config_error("config: unknown key '" + key + "'");
    } catch (const parse_error&) {
        throw config_error("config: invalid value for " + key + ": '" + value + "'");
    }
}

/// key=value per line; blank lines and lines starting with # are skipped.
inline RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = csvio::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw config_error("config: line " + std::to_string(line_no) +
                               " is not key=value: '" + trimmed + "'");
        }
        const std::string key = csvio::trim(trimmed.substr(0, eq));
        const std::string value = csvio::trim(trimmed.substr(eq + 1));
        if (key.empty()) {
            throw config_error("config: empty key on line " + std::to_string(line_no));
        }
        apply_config_key(cfg, key, value);
    }
    return cfg;
}

} // namespace dgrnn
