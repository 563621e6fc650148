#pragma once

#include <cstdint>
#include <vector>

#include "modest/learning.hpp"
#include "modest/runner.hpp"

namespace modest {

// One-peer exponential graph: offsets 2^m mod n (duplicates and zero
// removed), cycled round-robin so each node sends and receives exactly one
// model per round.
struct ExponentialGraphSchedule {
    std::size_t n = 0;
    std::vector<std::size_t> offsets;

    static ExponentialGraphSchedule build(std::size_t n);
    std::size_t peer_of(std::size_t node, Round k) const;
};

struct BaselineConfig {
    std::size_t n = 0;
    int s = 8;  // coordinator sample size (coordinator baseline only)
    TrainerConfig trainer;
    ComputeModel compute;
    LatencyModel latency = LatencyModel::constant(1, 1);
    std::uint64_t seed = 1;
    SimTime horizon = 0;
    TargetSpec target;
    Round max_rounds = 0;  // 0: until horizon/target
    int bytes_per_param = 4;
    std::int64_t header_bytes = 32;
    bool record_round_models = false;
};

// Coordinator baseline: a fixed, well-connected server samples s nodes per
// round, ships the global model out, and averages the s returned models.
RunResult run_fedavg(const BaselineConfig& cfg, const Task& task);

// Gossip-averaging baseline: every node trains every round, then averages
// pairwise with the model received from its scheduled neighbour.
RunResult run_dsgd(const BaselineConfig& cfg, const Task& task);

struct DsgdReport {
    double mean_loss = 0.0;
    double std_loss = 0.0;
    double mean_metric = 0.0;
    double std_metric = 0.0;
};

DsgdReport dsgd_report(const std::vector<Model>& models, const LocalDataset& test, TaskKind kind);

// Mean pairwise L2 distance between local models.
double consensus_distance(const std::vector<Model>& models);

}  // namespace modest
