#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "modest/types.hpp"

namespace modest {

struct RankedEntry {
    std::uint64_t digest = 0;
    NodeId node;
};

// Candidates ordered by hash(id || round), ascending, ties broken by id.
// Every holder of the same candidate set derives the identical list, and the
// order is re-randomized each round.
struct RankedCandidates {
    Round round = 0;
    std::vector<RankedEntry> entries;

    std::vector<NodeId> head(std::size_t count) const;
    std::size_t size() const { return entries.size(); }
};

RankedCandidates rank_candidates(const std::vector<NodeId>& candidates, Round k);

// One attempt at assembling `target_size` live nodes for a round: the head of
// the ranked list is pinged in parallel, each expiry advances one further down
// the list, and the attempt completes as soon as enough pongs are in. The
// caller owns timers (one per issued ping, duration dt) and message delivery;
// this type only sequences the decisions.
class SampleRequest {
  public:
    struct Step {
        std::vector<NodeId> pings;  // issue ping(round) + dt timer per node
        bool completed = false;
        std::vector<NodeId> sample;  // rank order, size target_size
        bool stalled = false;        // attempt exhausted below target
    };

    SampleRequest(RankedCandidates ranked, std::size_t target_size);

    Step begin();
    Step on_pong(const NodeId& j);
    Step on_ping_timeout(const NodeId& j);

    bool done() const { return completed_ || stalled_; }
    bool completed() const { return completed_; }
    bool stalled() const { return stalled_; }
    Round round() const { return ranked_.round; }
    std::size_t target_size() const { return target_; }
    const std::vector<NodeId>& responders() const { return responders_; }
    std::size_t pending_pings() const { return awaiting_.size(); }

  private:
    Step finish_or_wait(Step step);
    std::vector<NodeId> rank_ordered_sample() const;

    RankedCandidates ranked_;
    std::size_t target_;
    std::size_t cursor_ = 0;  // next unpinged index in ranked_
    std::set<NodeId> pinged_;
    std::set<NodeId> awaiting_;
    std::vector<NodeId> responders_;  // arrival order, deduplicated
    bool completed_ = false;
    bool stalled_ = false;
};

// Retry pacing after a stalled attempt: bounded exponential backoff
// (dt, 2dt, 4dt, capped at 8dt).
SimTime sample_retry_delay(SimTime dt, int attempt);

}  // namespace modest
