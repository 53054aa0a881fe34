#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgrnn/dataset.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/model.hpp"

namespace dgrnn {

// Checkpoint layout (all integers and doubles little-endian):
//   magic "DGRC", u32 format version
//   u64 header length, JSON header (model config, resolution, norm stats)
//   u64 parameter count, then per parameter:
//     u32 name length, name bytes
//     u32 rank, u64 dims..., f64 values...
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig model;
    ResolutionConfig resolution;
    NormStats stats;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

namespace detail {

static_assert(sizeof(double) == 8, "checkpoint format assumes 8-byte doubles");

inline bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    unsigned char byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if (!host_is_little_endian()) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& what) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw parse_error("checkpoint: truncated while reading " + what);
    if (!host_is_little_endian()) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

} // namespace detail

inline nlohmann::json model_config_json(const ModelConfig& m) {
    return nlohmann::json{{"n_nodes", m.n_nodes},
                          {"history_len", m.history_len},
                          {"horizon", m.horizon},
                          {"attn_channels", m.attn_channels},
                          {"hidden_dim", m.hidden_dim},
                          {"head_dim", m.head_dim},
                          {"n_heads", m.n_heads},
                          {"diffusion_steps", m.diffusion_steps},
                          {"variant", variant_name(m.variant)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.n_nodes = j.at("n_nodes").get<std::size_t>();
    m.history_len = j.at("history_len").get<std::size_t>();
    m.horizon = j.at("horizon").get<std::size_t>();
    m.attn_channels = j.at("attn_channels").get<std::size_t>();
    m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    m.head_dim = j.at("head_dim").get<std::size_t>();
    m.n_heads = j.at("n_heads").get<std::size_t>();
    m.diffusion_steps = j.at("diffusion_steps").get<std::size_t>();
    m.variant = variant_from_name(j.at("variant").get<std::string>());
    return m;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw value_error("checkpoint: cannot open '" + path + "' for writing");
    out.write("DGRC", 4);
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    nlohmann::json header{
        {"model", model_config_json(ckpt.model)},
        {"resolution",
         {{"steps_per_day", ckpt.resolution.steps_per_day},
          {"history_len", ckpt.resolution.history_len},
          {"horizon", ckpt.resolution.horizon}}},
        {"stats", {{"mean", ckpt.stats.mean}, {"std", ckpt.stats.std_dev}}}};
    const std::string header_str = header.dump();
    detail::write_le<std::uint64_t>(out, header_str.size());
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    detail::write_le<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d = 0; d < tensor.rank(); ++d)
            detail::write_le<std::uint64_t>(out, tensor.dim(d));
        for (std::size_t i = 0; i < tensor.size(); ++i) detail::write_le<double>(out, tensor[i]);
    }
    if (!out) throw value_error("checkpoint: write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "DGRC") {
        throw parse_error("checkpoint: bad magic in '" + path + "'");
    }
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw parse_error("checkpoint: unsupported format version " + std::to_string(version));
    }
    const auto header_len = detail::read_le<std::uint64_t>(in, "header length");
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw parse_error("checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("checkpoint: header is not valid JSON: ") + e.what());
    }
    Checkpoint ckpt;
    try {
        ckpt.model = model_config_from_json(header.at("model"));
        const auto& res = header.at("resolution");
        ckpt.resolution.steps_per_day = res.at("steps_per_day").get<std::size_t>();
        ckpt.resolution.history_len = res.at("history_len").get<std::size_t>();
        ckpt.resolution.horizon = res.at("horizon").get<std::size_t>();
        ckpt.stats.mean = header.at("stats").at("mean").get<double>();
        ckpt.stats.std_dev = header.at("stats").at("std").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("checkpoint: header field missing: ") + e.what());
    }
    const auto n_params = detail::read_le<std::uint64_t>(in, "parameter count");
    for (std::uint64_t k = 0; k < n_params; ++k) {
        const auto name_len = detail::read_le<std::uint32_t>(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw parse_error("checkpoint: truncated parameter name");
        const auto rank = detail::read_le<std::uint32_t>(in, "rank of " + name);
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d)
            shape[d] = detail::read_le<std::uint64_t>(in, "dims of " + name);
        Tensor t(shape);
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = detail::read_le<double>(in, "values of " + name);
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

/// Snapshot of a model's parameters, ordered as Model::params().
inline Checkpoint make_checkpoint(Model& model, const ResolutionConfig& res,
                                  const NormStats& stats) {
    Checkpoint ckpt;
    ckpt.model = model.config();
    ckpt.resolution = res;
    ckpt.stats = stats;
    for (Parameter* p : model.params()) ckpt.tensors.emplace_back(p->name, p->tensor());
    return ckpt;
}

/// Copies checkpoint tensors into the model. Every parameter must be
/// present with matching shape; errors name the offending field.
inline void restore_parameters(Model& model, const Checkpoint& ckpt) {
    for (Parameter* p : model.params()) {
        const Tensor* found = nullptr;
        for (const auto& [name, tensor] : ckpt.tensors) {
            if (name == p->name) {
                found = &tensor;
                break;
            }
        }
        if (!found) {
            throw value_error("checkpoint: parameter '" + p->name + "' missing");
        }
        if (found->shape() != p->tensor().shape()) {
            throw shape_error("checkpoint: parameter '" + p->name + "' has shape " +
                              shape_str(found->shape()) + ", model expects " +
                              shape_str(p->tensor().shape()));
        }
        p->tensor() = *found;
    }
}

} // namespace dgrnn
