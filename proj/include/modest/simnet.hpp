#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "modest/membership.hpp"
#include "modest/metrics.hpp"
#include "modest/model.hpp"
#include "modest/types.hpp"

namespace modest {

// Everything the protocols exchange. Model/view payloads are shared
// snapshots so a broadcast does not copy per recipient.
struct Message {
    enum class Kind : std::uint8_t {
        Ping,
        Pong,
        Joined,
        Left,
        Train,      // aggregated model, aggregator -> trainer
        Aggregate,  // trained model, trainer -> aggregator
        Assign,     // baseline: coordinator hands out work
        Return,     // baseline: trained model back to coordinator
        PeerModel,  // baseline: gossip-averaging neighbour exchange
    };
    Kind kind = Kind::Ping;
    Round round = 0;
    std::int64_t counter = 0;  // joined/left event index
    std::shared_ptr<const Model> model;
    std::shared_ptr<const View> view;
};

// One-way delays in virtual microseconds: either ingested from an RTT matrix
// (sites assigned round-robin by node index) or drawn per ordered pair.
class LatencyModel {
  public:
    static LatencyModel uniform(std::size_t n, SimTime lo, SimTime hi, std::uint64_t seed);
    static LatencyModel constant(std::size_t n, SimTime delay);
    // headerless CSV, milliseconds; halve_rtt turns RTT figures into one-way
    static LatencyModel from_matrix_csv(const std::string& path, std::size_t n, bool halve_rtt = true);
    static LatencyModel from_matrix(std::vector<std::vector<SimTime>> site_delays, std::size_t n);

    SimTime delay(std::size_t from, std::size_t to) const;
    SimTime max_delay() const;                   // max over distinct node pairs
    std::size_t lowest_median_node() const;      // the natural coordinator seat
    std::size_t node_count() const { return n_; }

  private:
    LatencyModel() = default;
    std::size_t n_ = 0;
    std::size_t sites_ = 0;
    std::vector<SimTime> site_delay_;  // sites_ x sites_
    SimTime self_delay_ = 0;
};

struct FaultAction {
    enum class Kind : std::uint8_t { Crash, Recover, Join, Leave };
    SimTime time = 0;
    Kind kind = Kind::Crash;
    std::size_t node = 0;
};
using FaultSchedule = std::vector<FaultAction>;

enum class StopKind { Quiescent, Horizon, Stopped, Stalled };

struct RunOutcome {
    StopKind kind = StopKind::Quiescent;
    SimTime end_time = 0;
    std::string detail;  // stall diagnostic or stop reason
};

// Deterministic discrete-event engine. Events execute in (time, seq) order
// where seq is assigned at scheduling time; identical configuration and seeds
// replay the identical event sequence.
class Simulation {
  public:
    Simulation(std::size_t n, LatencyModel latency, MetricsCollector& metrics);

    SimTime now() const { return now_; }
    std::size_t node_count() const { return n_; }
    const LatencyModel& latency() const { return latency_; }
    MetricsCollector& metrics() { return metrics_; }

    bool up(std::size_t node) const { return up_[node]; }
    void set_up(std::size_t node, bool value) { up_[node] = value; }  // pre-run topology setup
    std::size_t up_count() const;

    void crash(std::size_t node);    // unresponsive: drops timers/compute, refuses deliveries
    void recover(std::size_t node);  // responsive again, state intact

    // Delivery at now + latency(from,to); silently dropped when the recipient
    // is down at delivery time (send-side bytes still count). Self-sends stay
    // local: zero latency by default and no bytes accounted.
    void send(std::size_t from, std::size_t to, Message msg, TransferBytes bytes);

    // One-shot timers keyed (node, tag); re-setting a live tag replaces it.
    void set_timer(std::size_t node, SimTime delay, std::uint64_t tag);
    void cancel_timer(std::size_t node, std::uint64_t tag);

    // Local computation finishing at now + duration; aborted if the node
    // crashes first.
    void schedule_compute(std::size_t node, SimTime duration, std::uint64_t token);

    // Driver-level events (fault injection, barriers); run regardless of node
    // liveness.
    void schedule_control(SimTime delay, std::function<void(Simulation&)> fn);

    void apply(const FaultSchedule& schedule);

    struct Hooks {
        std::function<void(std::size_t self, std::size_t from, const Message&)> on_message;
        std::function<void(std::size_t self, std::uint64_t tag)> on_timer;
        std::function<void(std::size_t self, std::uint64_t token)> on_compute;
        std::function<void(const FaultAction&)> on_fault;  // runs after the engine applied it
    };
    void set_hooks(Hooks hooks) { hooks_ = std::move(hooks); }

    // Protocol progress feed for stall detection.
    void mark_round_progress(Round k);
    Round max_round_started() const { return max_round_; }

    // Declare the run stalled if no round advances within `window`; the
    // describe callback contributes the diagnostic text.
    void enable_stall_detection(SimTime window, std::function<std::string()> describe);

    void request_stop(std::string reason);

    RunOutcome run(SimTime horizon);

  private:
    struct Event {
        SimTime time = 0;
        std::uint64_t seq = 0;
        std::function<void(Simulation&)> fn;
    };
    struct EventOrder {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    void push(SimTime at, std::function<void(Simulation&)> fn);

    std::size_t n_;
    LatencyModel latency_;
    MetricsCollector& metrics_;
    std::vector<char> up_;
    std::vector<std::uint64_t> node_epoch_;  // bumped on crash; cancels timers/compute
    std::map<std::pair<std::size_t, std::uint64_t>, std::uint64_t> timer_gen_;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    std::uint64_t next_seq_ = 0;
    SimTime now_ = 0;
    Hooks hooks_;

    bool stop_requested_ = false;
    std::string stop_reason_;
    Round max_round_ = 0;
    bool stall_enabled_ = false;
    SimTime stall_window_ = 0;
    std::function<std::string()> stall_describe_;
    SimTime last_progress_time_ = 0;
    std::size_t pending_real_events_ = 0;  // everything except the watchdog
};

}  // namespace modest
