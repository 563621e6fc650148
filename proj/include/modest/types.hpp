#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace modest {

// Virtual time in microseconds. All simulation arithmetic is integral so
// event ordering is exact and platform-independent.
using SimTime = std::int64_t;

constexpr SimTime ms_to_us(double ms) {
    return static_cast<SimTime>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5));
}
constexpr double us_to_ms(SimTime us) { return static_cast<double>(us) / 1000.0; }

// Learning round number. Signed so window arithmetic (k - dk) cannot underflow.
using Round = std::int64_t;

// Opaque node identifier with a canonical big-endian byte encoding.
// Identifiers are drawn per session from the seed, so their ordering is
// unrelated to join order or network position.
struct NodeId {
    std::uint64_t value = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

std::ostream& operator<<(std::ostream& os, const NodeId& id);

inline std::array<std::uint8_t, 8> encode_be64(std::uint64_t v) {
    std::array<std::uint8_t, 8> out{};
    for (int i = 7; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return out;
}

inline std::array<std::uint8_t, 8> encode(const NodeId& id) { return encode_be64(id.value); }

// n distinct identifiers for one session, sorted ascending so that the
// simulator's node index i maps to the i-th smallest id.
std::vector<NodeId> make_node_ids(std::uint64_t seed, std::size_t n);

}  // namespace modest
