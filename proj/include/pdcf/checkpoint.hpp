#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdcf/image_io.hpp"
#include "pdcf/network.hpp"

namespace pdcf {

/// Checkpoint file layout, all integers little-endian:
///   bytes 0..3   magic "PDCF"
///   bytes 4..7   u32 format version (currently 1)
///   bytes 8..11  u32 header length
///   header       UTF-8 JSON: network config + tensor manifest
///   payload      32-bit floats in manifest order
/// Weights are stored as f32 regardless of compute precision; save -> load
/// -> save is byte-identical because f32 -> f64 -> f32 is exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

using ordered_json = nlohmann::ordered_json;

inline void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline ordered_json config_to_json(const NetworkConfig& c) {
    ordered_json j;
    j["base_channels"] = c.base_channels;
    j["se_reduction"] = c.se_reduction;
    j["dem_count"] = c.dem_count;
    j["ablate_pdc"] = c.ablate_pdc;
    j["ffm_wiring"] = {{c.ffm_wiring[0][0], c.ffm_wiring[0][1]},
                       {c.ffm_wiring[1][0], c.ffm_wiring[1][1]}};
    return j;
}

inline NetworkConfig config_from_json(const ordered_json& j) {
    NetworkConfig c;
    c.base_channels = j.at("base_channels").get<int>();
    c.se_reduction = j.at("se_reduction").get<int>();
    c.dem_count = j.at("dem_count").get<int>();
    c.ablate_pdc = j.at("ablate_pdc").get<bool>();
    const auto& w = j.at("ffm_wiring");
    if (!w.is_array() || w.size() != 2) throw DataError("checkpoint: malformed ffm_wiring");
    for (int i = 0; i < 2; ++i) {
        c.ffm_wiring[i][0] = w[i].at(0).get<int>();
        c.ffm_wiring[i][1] = w[i].at(1).get<int>();
    }
    c.validate();
    return c;
}

}  // namespace ckpt_detail

inline std::vector<std::uint8_t> checkpoint_serialize(const PdcfNet& net) {
    using ckpt_detail::ordered_json;
    ordered_json header;
    header["config"] = ckpt_detail::config_to_json(net.config());

    ordered_json manifest = ordered_json::array();
    std::vector<std::uint8_t> payload;
    for (const auto& [name, t] : net.registry().entries()) {
        const Shape s = t.shape();
        ordered_json entry;
        entry["name"] = name;
        entry["shape"] = {s.n, s.c, s.h, s.w};
        entry["dtype"] = "f32";
        entry["offset"] = payload.size();
        entry["size"] = t.numel();
        manifest.push_back(entry);
        const double* d = t.data();
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(d[i]));
            ckpt_detail::append_u32le(payload, bits);
        }
    }
    header["tensors"] = manifest;
    const std::string header_str = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(12 + header_str.size() + payload.size());
    out.insert(out.end(), {'P', 'D', 'C', 'F'});
    ckpt_detail::append_u32le(out, kCheckpointVersion);
    ckpt_detail::append_u32le(out, static_cast<std::uint32_t>(header_str.size()));
    out.insert(out.end(), header_str.begin(), header_str.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

inline void checkpoint_save(const std::string& path, const PdcfNet& net) {
    const std::vector<std::uint8_t> bytes = checkpoint_serialize(net);
    io::write_file_atomic(path, bytes.data(), bytes.size());
}

inline PdcfNet checkpoint_deserialize(const std::vector<std::uint8_t>& bytes,
                                      const std::string& name) {
    using ckpt_detail::ordered_json;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "PDCF", 4) != 0) {
        throw DataError(name + ": not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = ckpt_detail::read_u32le(&bytes[4]);
    if (version != kCheckpointVersion) {
        throw DataError(name + ": checkpoint version mismatch: expected " +
                        std::to_string(kCheckpointVersion) + ", got " + std::to_string(version));
    }
    const std::uint32_t header_len = ckpt_detail::read_u32le(&bytes[8]);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
        throw DataError(name + ": truncated checkpoint header");
    }

    ordered_json header;
    try {
        header = ordered_json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(name + ": malformed checkpoint header: " + e.what());
    }

    NetworkConfig config;
    std::size_t payload_elems = 0;
    try {
        config = ckpt_detail::config_from_json(header.at("config"));
        for (const auto& entry : header.at("tensors")) {
            payload_elems += entry.at("size").get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(name + ": malformed checkpoint manifest: " + e.what());
    }

    const std::size_t payload_off = 12 + header_len;
    const std::size_t payload_bytes = bytes.size() - payload_off;
    if (payload_bytes < payload_elems * 4) {
        throw DataError(name + ": truncated payload");
    }
    if (payload_bytes > payload_elems * 4) {
        throw DataError(name + ": payload larger than manifest coverage");
    }

    PdcfNet net = PdcfNet::build(config, 0);
    const auto& entries = net.registry().entries();
    const auto& manifest = header.at("tensors");
    if (manifest.size() != entries.size()) {
        throw DataError(name + ": checkpoint has " + std::to_string(manifest.size()) +
                        " tensors, model expects " + std::to_string(entries.size()));
    }

    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string& pname = entries[i].first;
        Tensor param = entries[i].second;  // shared handle, loads in place
        const auto& entry = manifest[i];
        const std::string tname = entry.at("name").get<std::string>();
        if (tname != pname) {
            throw DataError(name + ": manifest tensor " + tname + " does not match model parameter " +
                            pname);
        }
        const auto& js = entry.at("shape");
        const Shape want = param.shape();
        const Shape got{js.at(0).get<int>(), js.at(1).get<int>(), js.at(2).get<int>(),
                        js.at(3).get<int>()};
        if (got != want) {
            throw DataError(name + ": tensor " + tname + " shape mismatch: checkpoint " +
                            got.str() + " vs model " + want.str());
        }
        if (entry.at("dtype").get<std::string>() != "f32") {
            throw DataError(name + ": tensor " + tname + " has unsupported dtype");
        }
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t size = entry.at("size").get<std::size_t>();
        if (offset != expected_offset || size != param.numel()) {
            throw DataError(name + ": manifest offsets do not tile the payload at " + tname);
        }
        expected_offset += size * 4;

        double* d = param.data();
        const std::uint8_t* src = bytes.data() + payload_off + offset;
        for (std::size_t j = 0; j < size; ++j) {
            const std::uint32_t bits = ckpt_detail::read_u32le(src + j * 4);
            d[j] = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return net;
}

inline PdcfNet checkpoint_load(const std::string& path) {
    return checkpoint_deserialize(io::read_file(path), path);
}

}  // namespace pdcf
