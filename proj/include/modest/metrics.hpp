#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modest/types.hpp"

namespace modest {

enum class TransferKind : std::uint8_t { Model, Overhead };

// Split byte attribution for one message.
struct TransferBytes {
    std::int64_t model = 0;
    std::int64_t overhead = 0;

    std::int64_t total() const { return model + overhead; }
};

struct NodeBytes {
    std::int64_t model_in = 0;
    std::int64_t model_out = 0;
    std::int64_t overhead_in = 0;
    std::int64_t overhead_out = 0;

    std::int64_t total() const { return model_in + model_out + overhead_in + overhead_out; }
};

// Per-round model-transfer counts, for the transfer-accounting cross-check.
struct RoundTransferCounts {
    std::int64_t aggregate_msgs = 0;  // trainers -> aggregators, round tag k
    std::int64_t train_msgs = 0;      // aggregators -> trainers, round tag k
};

struct RoundTrace {
    Round round = 0;
    SimTime start = -1;  // first activity observed for the round
    SimTime end = -1;    // time of the round's recorded metric
    double loss = 0.0;
    double metric = 0.0;
    bool has_metric = false;
    int aggregators_completed = 0;
    std::size_t trainer_count = 0;
    std::vector<SimTime> sample_durations;
};

struct PropagationRecord {
    NodeId joiner;
    NodeId observer;
    SimTime join_time = 0;
    SimTime seen_time = 0;
    Round join_round = 0;
    Round seen_round = 0;
};

// Single-writer, append-mostly sink for everything a run reports. Exports are
// deterministic: fixed row ordering, fixed formatting.
class MetricsCollector {
  public:
    explicit MetricsCollector(std::size_t n_nodes) : bytes_(n_nodes) {}

    // byte ledger
    void record_out(std::size_t node, const TransferBytes& b);
    void record_in(std::size_t node, const TransferBytes& b);
    const std::vector<NodeBytes>& per_node_bytes() const { return bytes_; }
    std::int64_t total_model_bytes() const;
    std::int64_t total_overhead_bytes() const;
    std::int64_t total_bytes() const;
    double overhead_share() const;

    // transfer counting
    void count_aggregate_msg(Round k) { ++transfers_[k].aggregate_msgs; }
    void count_train_msg(Round k) { ++transfers_[k].train_msgs; }
    const std::map<Round, RoundTransferCounts>& transfer_counts() const { return transfers_; }

    // round lifecycle
    void round_started(Round k, SimTime t);
    void round_metric(Round k, SimTime t, double loss, double metric);  // first record wins
    void aggregator_completed(Round k);
    void trainers_selected(Round k, std::size_t count);
    void sample_duration(Round k, SimTime duration);
    const std::map<Round, RoundTrace>& rounds() const { return rounds_; }

    // membership propagation
    void join_observed(const NodeId& joiner, SimTime t, Round k) { join_points_[joiner] = {t, k}; }
    void view_inclusion(const NodeId& joiner, const NodeId& observer, SimTime t, Round k);
    const std::vector<PropagationRecord>& propagation() const { return propagation_; }

    // targets
    void set_target(double value, bool higher_is_better);
    std::optional<SimTime> time_to_target() const { return time_to_target_; }
    std::optional<Round> rounds_to_target() const { return rounds_to_target_; }

    std::optional<double> final_loss() const;
    std::optional<double> final_metric() const;
    Round max_metric_round() const;

    // conservation cross-check inputs maintained by the simulator
    void note_delivered(std::int64_t bytes) { delivered_bytes_ += bytes; }
    void note_lost(std::int64_t bytes) { lost_bytes_ += bytes; }
    std::int64_t delivered_bytes() const { return delivered_bytes_; }
    std::int64_t lost_bytes() const { return lost_bytes_; }

    struct Summary {
        std::int64_t total_bytes = 0;
        std::int64_t model_bytes = 0;
        std::int64_t overhead_bytes = 0;
        std::int64_t min_node_bytes = 0;
        std::int64_t max_node_bytes = 0;
        double mean_node_bytes = 0.0;
        double overhead_share = 0.0;
        std::optional<SimTime> time_to_target;
        std::optional<Round> rounds_to_target;
        std::optional<double> final_loss;
        std::optional<double> final_metric;
        Round max_round = 0;
    };
    Summary summary() const;

    // exports: timeline.csv, bytes.csv, rounds.csv, propagation.csv, summary.json
    void export_run(const std::string& out_dir, const std::string& extra_summary_json = "") const;

  private:
    RoundTrace& trace(Round k);

    std::vector<NodeBytes> bytes_;
    std::map<Round, RoundTransferCounts> transfers_;
    std::map<Round, RoundTrace> rounds_;
    std::map<NodeId, std::pair<SimTime, Round>> join_points_;
    std::vector<PropagationRecord> propagation_;
    double target_value_ = 0.0;
    bool target_higher_ = false;
    bool target_set_ = false;
    std::optional<SimTime> time_to_target_;
    std::optional<Round> rounds_to_target_;
    std::int64_t delivered_bytes_ = 0;
    std::int64_t lost_bytes_ = 0;
};

}  // namespace modest
