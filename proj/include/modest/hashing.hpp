#pragma once

#include <cstddef>
#include <cstdint>

#include "modest/types.hpp"

namespace modest {

// FNV-1a over a byte stream.
inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// 64-bit avalanche finalizer (murmur3 fmix64).
inline std::uint64_t fmix64(std::uint64_t h) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return h;
}

// Per-round ranking digest: hash of (canonical node id bytes || big-endian
// round). Concatenating the round re-randomizes the candidate order each
// round while staying identical for every holder of the same view.
inline std::uint64_t sample_digest(const NodeId& node, Round k) {
    std::uint8_t buf[16];
    const auto id_bytes = encode(node);
    const auto k_bytes = encode_be64(static_cast<std::uint64_t>(k));
    for (int i = 0; i < 8; ++i) {
        buf[i] = id_bytes[static_cast<std::size_t>(i)];
        buf[8 + i] = k_bytes[static_cast<std::size_t>(i)];
    }
    return fmix64(fnv1a64(buf, 16));
}

}  // namespace modest
