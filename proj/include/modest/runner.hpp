#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "modest/learning.hpp"
#include "modest/metrics.hpp"
#include "modest/model.hpp"
#include "modest/protocol.hpp"
#include "modest/simnet.hpp"

namespace modest {

// Training duration model: per-(node, round) draw from a deterministic
// per-pair stream, so runs with identical seeds see identical durations
// regardless of scheduling order.
struct ComputeModel {
    enum class Kind { Constant, Uniform, LogNormal } kind = Kind::Constant;
    double mean_ms = 500.0;  // constant value, or lognormal median
    double lo_ms = 0.0;      // uniform bounds
    double hi_ms = 0.0;
    double sigma = 0.25;  // lognormal shape
    std::uint64_t seed = 0;

    SimTime duration(std::size_t node, Round k) const;
};

struct TargetSpec {
    bool enabled = false;
    double value = 0.0;
    bool higher_is_better = false;  // accuracy targets count up, loss targets down
    bool stop_on_hit = true;
};

struct RunResult {
    RunOutcome outcome;
    std::unique_ptr<MetricsCollector> metrics;
    std::map<Round, Model> round_models;    // per-round aggregated/global model, when recorded
    std::vector<Model> final_local_models;  // gossip baseline only
    std::size_t server_node = static_cast<std::size_t>(-1);
    Round last_crash_round = 0;
    std::int64_t candidate_violations = 0;  // crashed nodes offered as candidates past the window
    std::vector<Round> final_k_train;       // per-node last training round at shutdown
    std::map<NodeId, std::vector<NodeId>> join_observers;  // nodes up when each joiner advertised
};

struct ModestRunConfig {
    ProtocolConfig protocol;
    std::size_t n = 0;
    std::size_t initial_members = 0;  // 0 means all n; the rest join via the fault schedule
    TrainerConfig trainer;
    ComputeModel compute;
    LatencyModel latency = LatencyModel::constant(1, 1);
    FaultSchedule faults;
    std::uint64_t seed = 1;
    SimTime horizon = 0;
    TargetSpec target;
    Round max_rounds = 0;      // 0: until horizon/target
    SimTime stall_window = 0;  // 0: default 10 * dt
    bool record_round_models = false;
};

RunResult run_modest(const ModestRunConfig& cfg, const Task& task);

}  // namespace modest
