#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/fedcore.hpp"
#include "fedflow/neuralnet.hpp"

namespace fedflow::wire {

//------------------------------------------------------------------------------
// Parameter exchange frame, little-endian:
//   magic "FEDF" | version u16 = 1 | msg_type u8 | round u32 | client_id u32
//   | payload_len u64 | payload bytes | CRC32 u32
// The CRC covers every byte from the magic through the end of the payload.
// GLOBAL_PARAMS and CLIENT_UPDATE payloads are an n_k u64 (zero for
// GLOBAL_PARAMS) followed by an FWTS parameter block.
//------------------------------------------------------------------------------

inline constexpr char fedf_magic[5] = "FEDF";
inline constexpr std::uint16_t fedf_version = 1;
inline constexpr std::size_t frame_header_size = 4 + 2 + 1 + 4 + 4 + 8;
inline constexpr std::size_t max_payload_len = std::size_t{1} << 30;

enum class MsgType : std::uint8_t {
    hello = 0,
    global_params = 1,
    client_update = 2,
    round_done = 3,
    shutdown = 4,
    error = 5,
};

struct Frame {
    MsgType type = MsgType::hello;
    std::uint32_t round = 0;
    std::uint32_t client_id = 0;
    std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
    std::vector<std::uint8_t> out;
    out.reserve(frame_header_size + f.payload.size() + 4);
    out.insert(out.end(), fedf_magic, fedf_magic + 4);
    data::detail::put_u16(out, fedf_version);
    out.push_back(static_cast<std::uint8_t>(f.type));
    auto put_u32 = [&out](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    };
    put_u32(f.round);
    put_u32(f.client_id);
    data::detail::put_u64(out, f.payload.size());
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    put_u32(nn::crc32(out.data(), out.size()));
    return out;
}

// Payload length parsed from a complete header; lets stream readers size the
// remainder of the frame before decoding it.
inline std::uint64_t payload_length(const std::uint8_t* header, std::size_t len) {
    if (len < frame_header_size) throw protocol_error("frame header truncated");
    if (std::memcmp(header, fedf_magic, 4) != 0) throw protocol_error("bad frame magic");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i)
        n |= static_cast<std::uint64_t>(header[frame_header_size - 8 + i]) << (8 * i);
    if (n > max_payload_len) throw protocol_error("frame payload length exceeds limit");
    return n;
}

inline Frame decode_frame(const std::uint8_t* data, std::size_t size) {
    if (size < frame_header_size + 4) throw protocol_error("frame truncated");
    if (std::memcmp(data, fedf_magic, 4) != 0) throw protocol_error("bad frame magic");
    const std::uint16_t version = static_cast<std::uint16_t>(data[4]) |
                                  static_cast<std::uint16_t>(data[5]) << 8;
    if (version != fedf_version)
        throw protocol_error("unsupported frame version " + std::to_string(version));
    const std::uint8_t type = data[6];
    if (type > static_cast<std::uint8_t>(MsgType::error))
        throw protocol_error("unknown message type " + std::to_string(type));
    auto get_u32 = [data](std::size_t off) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[off + i]) << (8 * i);
        return v;
    };
    const std::uint64_t plen = payload_length(data, size);
    if (size != frame_header_size + plen + 4) throw protocol_error("frame length mismatch");
    const std::uint32_t stored = get_u32(size - 4);
    if (nn::crc32(data, size - 4) != stored) throw protocol_error("frame CRC mismatch");
    Frame f;
    f.type = static_cast<MsgType>(type);
    f.round = get_u32(7);
    f.client_id = get_u32(11);
    f.payload.assign(data + frame_header_size, data + frame_header_size + plen);
    return f;
}

// n_k u64 followed by the FWTS parameter block
inline std::vector<std::uint8_t> encode_params_payload(const nn::ModelParams& p,
                                                       std::uint64_t n_k) {
    std::vector<std::uint8_t> out;
    data::detail::put_u64(out, n_k);
    const auto block = nn::serialize_params(p);
    out.insert(out.end(), block.begin(), block.end());
    return out;
}

inline std::pair<nn::ModelParams, std::uint64_t> decode_params_payload(
    const std::uint8_t* data, std::size_t size) {
    if (size < 8) throw protocol_error("parameter payload truncated");
    std::uint64_t n_k = 0;
    for (int i = 0; i < 8; ++i) n_k |= static_cast<std::uint64_t>(data[i]) << (8 * i);
    try {
        return {nn::deserialize_params(data + 8, size - 8), n_k};
    } catch (const format_error& e) {
        throw protocol_error(std::string("parameter payload invalid: ") + e.what());
    }
}

// Collects the client updates of one synchronous round. Frames from another
// round are stale: they are counted and dropped without touching the round's
// state. A second update from the same client in the same round is a
// protocol violation.
class RoundCollector {
public:
    RoundCollector(std::uint32_t round, std::vector<int> expected)
        : round_(round), expected_(std::move(expected)) {}

    enum class Accept { accepted, stale };

    Accept offer(const Frame& f) {
        if (f.type != MsgType::client_update)
            throw protocol_error("unexpected message type in round collection");
        if (f.round != round_) {
            ++stale_count_;
            return Accept::stale;
        }
        const int id = static_cast<int>(f.client_id);
        bool known = false;
        for (int e : expected_) known = known || e == id;
        if (!known) throw protocol_error("update from unexpected client " + std::to_string(id));
        if (updates_.count(id)) throw protocol_error("duplicate update from client " + std::to_string(id));
        auto [params, n_k] = decode_params_payload(f.payload.data(), f.payload.size());
        fed::RoundUpdate up;
        up.client_id = id;
        up.params_local = std::move(params);
        up.n_k = static_cast<std::size_t>(n_k);
        updates_.emplace(id, std::move(up));
        return Accept::accepted;
    }

    bool complete() const { return updates_.size() == expected_.size(); }
    std::size_t stale_count() const { return stale_count_; }

    std::vector<fed::RoundUpdate> take() {
        std::vector<fed::RoundUpdate> out;
        out.reserve(updates_.size());
        for (auto& [id, up] : updates_) out.push_back(std::move(up));
        updates_.clear();
        return out;
    }

private:
    std::uint32_t round_;
    std::vector<int> expected_;
    std::map<int, fed::RoundUpdate> updates_;
    std::size_t stale_count_ = 0;
};

}  // namespace fedflow::wire
