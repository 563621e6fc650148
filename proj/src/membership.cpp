#include "modest/membership.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "modest/rng.hpp"

namespace modest {

std::ostream& operator<<(std::ostream& os, const NodeId& id) { return os << id.value; }

std::vector<NodeId> make_node_ids(std::uint64_t seed, std::size_t n) {
    SplitMix64 sm(mix_seed({seed, 0x6e6f64656964ULL}));  // "nodeid"
    std::set<std::uint64_t> seen;
    while (seen.size() < n) seen.insert(sm.next());
    std::vector<NodeId> ids;
    ids.reserve(n);
    for (std::uint64_t v : seen) ids.push_back(NodeId{v});
    return ids;
}

bool Registry::update(const NodeId& j, std::int64_t counter, EventKind kind) {
    auto it = entries_.find(j);
    if (it == entries_.end()) {
        entries_.emplace(j, RegistryEntry{counter, kind});
        return true;
    }
    if (it->second.counter < counter) {
        it->second = RegistryEntry{counter, kind};
        return true;
    }
    return false;
}

void Registry::merge(const Registry& other) {
    for (const auto& [j, e] : other.entries_) update(j, e.counter, e.kind);
}

std::vector<NodeId> Registry::registered() const {
    std::vector<NodeId> out;
    for (const auto& [j, e] : entries_)
        if (e.kind == EventKind::Joined) out.push_back(j);
    return out;
}

bool Registry::is_registered(const NodeId& j) const {
    auto it = entries_.find(j);
    return it != entries_.end() && it->second.kind == EventKind::Joined;
}

std::optional<RegistryEntry> Registry::find(const NodeId& j) const {
    auto it = entries_.find(j);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ActivityTable::update(const NodeId& j, Round k) {
    auto it = entries_.find(j);
    if (it == entries_.end())
        entries_.emplace(j, k);
    else
        it->second = std::max(it->second, k);
}

void ActivityTable::merge(const ActivityTable& other) {
    for (const auto& [j, k] : other.entries_) update(j, k);
}

Round ActivityTable::estimate_round() const {
    Round best = 0;
    for (const auto& [j, k] : entries_) best = std::max(best, k);
    return best;
}

std::optional<Round> ActivityTable::find(const NodeId& j) const {
    auto it = entries_.find(j);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<NodeId> candidates(const View& view, Round k, Round dk) {
    std::vector<NodeId> out;
    for (const auto& [j, kj] : view.activity.entries())
        if (kj > k - dk && view.registry.is_registered(j)) out.push_back(j);
    return out;  // map iteration is already ascending id order
}

static EventAdvert request_event(LocalIdentity& identity, View& view, EventKind kind) {
    identity.persistent_counter += 1;
    view.registry.update(identity.self, identity.persistent_counter, kind);
    view.activity.update(identity.self, 0);
    return EventAdvert{identity.persistent_counter, kind, identity.bootstrap_peers};
}

EventAdvert request_join(LocalIdentity& identity, View& view) {
    return request_event(identity, view, EventKind::Joined);
}

EventAdvert request_leave(LocalIdentity& identity, View& view) {
    return request_event(identity, view, EventKind::Left);
}

static void handle_event(View& view, const NodeId& j, std::int64_t c_j, EventKind kind) {
    view.registry.update(j, c_j, kind);
    // Activity refresh is unconditional even when the counter guard rejected
    // the event: the sender is demonstrably reachable right now.
    view.activity.update(j, view.activity.estimate_round());
}

void handle_joined(View& view, const NodeId& j, std::int64_t c_j) {
    handle_event(view, j, c_j, EventKind::Joined);
}

void handle_left(View& view, const NodeId& j, std::int64_t c_j) {
    handle_event(view, j, c_j, EventKind::Left);
}

std::optional<SimTime> rejoin_silence_budget(const std::vector<Activation>& activations, Round dk) {
    if (activations.size() < 2) return std::nullopt;
    const Activation& first = activations.front();
    const Activation& last = activations.back();
    if (last.round <= first.round) return std::nullopt;
    const double round_duration =
        static_cast<double>(last.at - first.at) / static_cast<double>(last.round - first.round);
    return static_cast<SimTime>(static_cast<double>(dk) * round_duration);
}

bool auto_rejoin_due(const std::vector<Activation>& activations, Round dk, SimTime now) {
    const auto budget = rejoin_silence_budget(activations, dk);
    if (!budget) return false;
    return now - activations.back().at > *budget;
}

std::int64_t view_wire_bytes(const View& view) {
    std::set<NodeId> keys;
    for (const auto& [j, e] : view.registry.entries()) keys.insert(j);
    for (const auto& [j, k] : view.activity.entries()) keys.insert(j);
    // id (8) + counter (8) + event (1) + activity round (8)
    return static_cast<std::int64_t>(keys.size()) * 25;
}

}  // namespace modest
