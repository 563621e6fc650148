#include "modest/sampling.hpp"

#include <algorithm>
#include <cassert>

#include "modest/hashing.hpp"

namespace modest {

std::vector<NodeId> RankedCandidates::head(std::size_t count) const {
    std::vector<NodeId> out;
    out.reserve(std::min(count, entries.size()));
    for (std::size_t i = 0; i < entries.size() && i < count; ++i) out.push_back(entries[i].node);
    return out;
}

RankedCandidates rank_candidates(const std::vector<NodeId>& candidates, Round k) {
    RankedCandidates ranked;
    ranked.round = k;
    ranked.entries.reserve(candidates.size());
    for (const NodeId& j : candidates) ranked.entries.push_back(RankedEntry{sample_digest(j, k), j});
    std::sort(ranked.entries.begin(), ranked.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.digest != b.digest) return a.digest < b.digest;
        return a.node < b.node;
    });
    return ranked;
}

SampleRequest::SampleRequest(RankedCandidates ranked, std::size_t target_size)
    : ranked_(std::move(ranked)), target_(target_size) {
    assert(target_ >= 1);
}

SampleRequest::Step SampleRequest::begin() {
    Step step;
    while (cursor_ < ranked_.size() && step.pings.size() < target_) {
        const NodeId j = ranked_.entries[cursor_++].node;
        pinged_.insert(j);
        awaiting_.insert(j);
        step.pings.push_back(j);
    }
    if (step.pings.empty()) stalled_ = true;  // nobody to ask
    step.stalled = stalled_;
    return step;
}

SampleRequest::Step SampleRequest::on_pong(const NodeId& j) {
    Step step;
    if (done() || !pinged_.count(j)) return step;  // unknown or duplicate attempt traffic
    awaiting_.erase(j);
    if (std::find(responders_.begin(), responders_.end(), j) != responders_.end()) return step;
    responders_.push_back(j);
    if (responders_.size() >= target_) {
        completed_ = true;
        step.completed = true;
        step.sample = rank_ordered_sample();
        return step;
    }
    return finish_or_wait(step);
}

SampleRequest::Step SampleRequest::on_ping_timeout(const NodeId& j) {
    Step step;
    if (done() || !awaiting_.count(j)) return step;  // ponged already or stale timer
    awaiting_.erase(j);
    if (cursor_ < ranked_.size()) {
        const NodeId next = ranked_.entries[cursor_++].node;
        pinged_.insert(next);
        awaiting_.insert(next);
        step.pings.push_back(next);
        return step;
    }
    return finish_or_wait(step);
}

SampleRequest::Step SampleRequest::finish_or_wait(Step step) {
    // Exhausted: every candidate pinged, nothing outstanding, still short.
    if (!done() && awaiting_.empty() && cursor_ >= ranked_.size() && responders_.size() < target_) {
        stalled_ = true;
        step.stalled = true;
    }
    return step;
}

std::vector<NodeId> SampleRequest::rank_ordered_sample() const {
    std::vector<NodeId> sample;
    sample.reserve(target_);
    for (const RankedEntry& e : ranked_.entries) {
        if (std::find(responders_.begin(), responders_.end(), e.node) != responders_.end()) {
            sample.push_back(e.node);
            if (sample.size() == target_) break;
        }
    }
    return sample;
}

SimTime sample_retry_delay(SimTime dt, int attempt) {
    SimTime delay = dt;
    for (int i = 1; i < attempt && delay < 8 * dt; ++i) delay *= 2;
    return std::min(delay, 8 * dt);
}

}  // namespace modest
