#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "modest/types.hpp"

namespace modest {

enum class EventKind : std::uint8_t { Joined, Left };

struct RegistryEntry {
    std::int64_t counter = 0;
    EventKind kind = EventKind::Joined;

    friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

// Last join/leave event per node, keyed by the emitter's persistent counter.
// An entry is only replaced by one with a strictly larger counter, so merging
// is a per-key max and the whole structure is a join-semilattice.
class Registry {
  public:
    // true if the entry was inserted or replaced
    bool update(const NodeId& j, std::int64_t counter, EventKind kind);
    void merge(const Registry& other);

    // nodes whose latest event is Joined, in ascending id order
    std::vector<NodeId> registered() const;
    bool is_registered(const NodeId& j) const;

    std::optional<RegistryEntry> find(const NodeId& j) const;
    const std::map<NodeId, RegistryEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    friend bool operator==(const Registry&, const Registry&) = default;

  private:
    std::map<NodeId, RegistryEntry> entries_;
};

// Last known active round per node. Values only ever grow.
class ActivityTable {
  public:
    void update(const NodeId& j, Round k);
    void merge(const ActivityTable& other);

    // max over all recorded rounds, 0 when empty
    Round estimate_round() const;

    std::optional<Round> find(const NodeId& j) const;
    const std::map<NodeId, Round>& entries() const { return entries_; }

    friend bool operator==(const ActivityTable&, const ActivityTable&) = default;

  private:
    std::map<NodeId, Round> entries_;
};

// A node's picture of the network: registry plus activity records. Views are
// gossiped by piggybacking on model transfers.
struct View {
    Registry registry;
    ActivityTable activity;

    void merge(const View& other) {
        registry.merge(other.registry);
        activity.merge(other.activity);
    }

    friend bool operator==(const View&, const View&) = default;
};

// Nodes eligible for sampling at round k: registered and active within the
// last dk rounds. Ascending id order.
std::vector<NodeId> candidates(const View& view, Round k, Round dk);

struct LocalIdentity {
    NodeId self;
    std::int64_t persistent_counter = 0;  // survives restarts
    std::vector<NodeId> bootstrap_peers;
};

// What a join/leave request must advertise: the fresh counter value and the
// peers to notify.
struct EventAdvert {
    std::int64_t counter = 0;
    EventKind kind = EventKind::Joined;
    std::vector<NodeId> peers;
};

EventAdvert request_join(LocalIdentity& identity, View& view);
EventAdvert request_leave(LocalIdentity& identity, View& view);

// Receipt of joined(j, c_j) / left(j, c_j). The registry guard may reject a
// stale counter; the activity refresh still runs, mirroring the call order of
// the membership procedure.
void handle_joined(View& view, const NodeId& j, std::int64_t c_j);
void handle_left(View& view, const NodeId& j, std::int64_t c_j);

// One sample-activation record: when it happened and for which round.
struct Activation {
    SimTime at = 0;
    Round round = 0;
};

// Re-advertisement heuristic for nodes that suspect they were flagged
// unresponsive: activations carry round numbers, so the mean round duration
// is (t_last - t_first) / (k_last - k_first); a node silent for more than dk
// rounds' worth of time has likely aged out of the activity window and asks
// to join again. Needs at least two recorded activations for the estimate.
bool auto_rejoin_due(const std::vector<Activation>& activations, Round dk, SimTime now);

// The silence budget itself: dk * estimated round duration, or nullopt when
// fewer than two activations are recorded.
std::optional<SimTime> rejoin_silence_budget(const std::vector<Activation>& activations, Round dk);

// Serialized size used for byte accounting only (the simulator passes
// structured values): per distinct node, id bytes + counter + event tag +
// activity round.
std::int64_t view_wire_bytes(const View& view);

}  // namespace modest
