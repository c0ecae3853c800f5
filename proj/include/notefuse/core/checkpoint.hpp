#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/errors.hpp"
#include "notefuse/core/optim.hpp"

namespace notefuse::core {

// Single-file checkpoint: 8-byte magic, u64 header length, JSON header
// (kind, config echo, step count, loss, parameter index), then raw
// little-endian float64 parameter data in index order.
//
// Shared by the note encoder, the trajectory model and the recurrent
// baselines; mixed models prefix parameter names by section.

inline constexpr char kCheckpointMagic[8] = {'N', 'F', 'C', 'K', 'P', 'T', '0', '1'};

struct CheckpointHeader {
    std::string kind;
    nlohmann::json config;
    int64_t step = 0;
    double loss = 0.0;
    nlohmann::json extra;  // model-specific metadata (vocab paths, fusion, ...)
};

inline void save_checkpoint(const std::string& path, const CheckpointHeader& hdr,
                            const ParamStore& params) {
    nlohmann::json j;
    j["kind"] = hdr.kind;
    j["config"] = hdr.config;
    j["step"] = hdr.step;
    j["loss"] = hdr.loss;
    j["extra"] = hdr.extra;
    auto idx = nlohmann::json::array();
    for (const auto& [name, v] : params.items()) {
        idx.push_back({{"name", name}, {"shape", v.val().shape()}});
    }
    j["params"] = idx;
    const std::string header = j.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, v] : params.items()) {
        const auto& d = v.val().vec();
        out.write(reinterpret_cast<const char*>(d.data()),
                  static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    if (!out) throw io_error("short write on checkpoint: " + path);
}

// Loads header + parameters. The store is populated in file order.
inline CheckpointHeader load_checkpoint(const std::string& path, ParamStore& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw io_error("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw io_error("truncated checkpoint header: " + path);

    nlohmann::json j = nlohmann::json::parse(header);
    CheckpointHeader hdr;
    hdr.kind = j.at("kind").get<std::string>();
    hdr.config = j.at("config");
    hdr.step = j.at("step").get<int64_t>();
    hdr.loss = j.at("loss").get<double>();
    hdr.extra = j.value("extra", nlohmann::json::object());

    for (const auto& p : j.at("params")) {
        const auto name = p.at("name").get<std::string>();
        const auto shape = p.at("shape").get<std::vector<int64_t>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.vec().data()),
                static_cast<std::streamsize>(t.vec().size() * sizeof(double)));
        if (!in) throw io_error("truncated checkpoint data: " + path);
        params.add(name, std::move(t));
    }
    return hdr;
}

inline CheckpointHeader peek_checkpoint(const std::string& path) {
    ParamStore scratch;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw io_error("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw io_error("truncated checkpoint header: " + path);
    nlohmann::json j = nlohmann::json::parse(header);
    CheckpointHeader hdr;
    hdr.kind = j.at("kind").get<std::string>();
    hdr.config = j.at("config");
    hdr.step = j.at("step").get<int64_t>();
    hdr.loss = j.at("loss").get<double>();
    hdr.extra = j.value("extra", nlohmann::json::object());
    return hdr;
}

}  // namespace notefuse::core
