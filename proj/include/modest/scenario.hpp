#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "modest/baselines.hpp"
#include "modest/learning.hpp"
#include "modest/runner.hpp"

namespace modest {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Method { Modest, FedAvg, Dsgd };

struct TaskSpec {
    std::string name = "linreg";  // linreg | softmax_blobs
    int dim = 16;
    int samples_per_node = 40;
    double noise_sigma = 0.1;
    int classes = 4;
    double separation = 3.0;
    int test_samples = 1000;
};

struct LatencySpec {
    std::string kind = "uniform";  // uniform | constant | matrix_csv
    double lo_ms = 20.0;
    double hi_ms = 200.0;
    double ms = 100.0;
    std::string path;
    bool rtt = true;  // matrix entries are round trips, halve them
};

// A fully-resolved scenario: parsed, defaulted, validated.
struct ScenarioConfig {
    Method method = Method::Modest;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;  // sweep/compare repetitions; defaults to {seed}
    int n = 0;
    int s = 0;
    int a = 1;
    double sf = 1.0;
    double delta_t_ms = 0.0;      // resolved value (informational when derived)
    bool delta_t_explicit = false;  // false: per-run dt = 2 * max pairwise latency
    Round delta_k = 0;            // 0 in the file = 2 * ceil(n/s)
    double horizon_ms = 0.0;
    Round max_rounds = 0;
    double stall_window_ms = 0.0;
    bool stop_at_target = true;
    bool fixed_aggregator = false;
    int bytes_per_param = 4;

    TaskSpec task;
    PartitionSpec partition;
    TrainerConfig trainer;
    LatencySpec latency;
    ComputeModel compute;
    std::vector<FaultAction> faults;  // times in microseconds after parsing
    std::optional<double> target_value;
    bool target_is_accuracy = false;

    int initial_members() const;  // n minus scheduled joiners

    // realized builders
    Task build_task(std::uint64_t task_seed) const;
    LatencyModel build_latency(std::uint64_t latency_seed) const;
    SimTime delta_t_us() const { return ms_to_us(delta_t_ms); }

    ModestRunConfig to_modest_run(std::uint64_t run_seed) const;
    BaselineConfig to_baseline_run(std::uint64_t run_seed) const;
};

// Parse a JSON document; applies the parameter-rule defaults and validates
// every invariant with a targeted message (throws ConfigError).
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

// Explicit target from the config when present, else the task's calibrated one.
TargetSpec resolve_target(const ScenarioConfig& sc, const Task& task);

std::string method_name(Method m);

}  // namespace modest
