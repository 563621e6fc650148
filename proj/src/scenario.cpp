#include "modest/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "modest/rng.hpp"

namespace modest {

using nlohmann::json;

std::string method_name(Method m) {
    switch (m) {
        case Method::Modest:
            return "modest";
        case Method::FedAvg:
            return "fedavg";
        case Method::Dsgd:
            return "dsgd";
    }
    return "?";
}

int ScenarioConfig::initial_members() const {
    int joiners = 0;
    for (const auto& f : faults)
        if (f.kind == FaultAction::Kind::Join) ++joiners;
    return n - joiners;
}

Task ScenarioConfig::build_task(std::uint64_t task_seed) const {
    if (task.name == "linreg") {
        LinRegSpec spec;
        spec.dim = task.dim;
        spec.nodes = n;
        spec.samples_per_node = task.samples_per_node;
        spec.noise_sigma = task.noise_sigma;
        spec.partition = partition;
        spec.seed = task_seed;
        spec.test_samples = task.test_samples;
        return make_task_linreg(spec);
    }
    BlobsSpec spec;
    spec.classes = task.classes;
    spec.dim = task.dim;
    spec.nodes = n;
    spec.samples_per_node = task.samples_per_node;
    spec.separation = task.separation;
    spec.partition = partition;
    spec.seed = task_seed;
    spec.test_samples = task.test_samples;
    return make_task_softmax_blobs(spec);
}

LatencyModel ScenarioConfig::build_latency(std::uint64_t latency_seed) const {
    const auto nn = static_cast<std::size_t>(n);
    if (latency.kind == "uniform")
        return LatencyModel::uniform(nn, ms_to_us(latency.lo_ms), ms_to_us(latency.hi_ms), latency_seed);
    if (latency.kind == "constant") return LatencyModel::constant(nn, ms_to_us(latency.ms));
    return LatencyModel::from_matrix_csv(latency.path, nn, latency.rtt);
}

TargetSpec resolve_target(const ScenarioConfig& sc, const Task& task) {
    TargetSpec t;
    if (sc.target_value) {
        t.enabled = true;
        t.value = *sc.target_value;
        t.higher_is_better = sc.target_is_accuracy;
        t.stop_on_hit = sc.stop_at_target;
    } else {
        // no explicit target: fall back to the task's calibrated one
        t.enabled = true;
        t.higher_is_better = task.target_is_accuracy();
        t.value = t.higher_is_better ? task.target_accuracy : task.target_loss;
        t.stop_on_hit = sc.stop_at_target;
    }
    return t;
}

ModestRunConfig ScenarioConfig::to_modest_run(std::uint64_t run_seed) const {
    ModestRunConfig rc;
    rc.n = static_cast<std::size_t>(n);
    rc.initial_members = static_cast<std::size_t>(initial_members());
    rc.protocol.s = s;
    rc.protocol.a = a;
    rc.protocol.sf = sf;
    rc.protocol.dk = delta_k;
    rc.protocol.bytes_per_param = bytes_per_param;
    rc.protocol.fixed_aggregator = fixed_aggregator;
    rc.trainer = trainer;
    rc.compute = compute;
    rc.compute.seed = mix_seed({run_seed, 0x64757261ULL});  // "dura"
    rc.latency = build_latency(mix_seed({run_seed, 0x6c6174ULL}));  // "lat"
    rc.protocol.dt = delta_t_explicit ? delta_t_us() : 2 * rc.latency.max_delay();
    rc.faults = faults;
    rc.seed = run_seed;
    rc.horizon = ms_to_us(horizon_ms);
    rc.max_rounds = max_rounds;
    rc.stall_window = ms_to_us(stall_window_ms);
    if (fixed_aggregator) rc.protocol.fixed_aggregator_node = rc.latency.lowest_median_node();
    return rc;
}

BaselineConfig ScenarioConfig::to_baseline_run(std::uint64_t run_seed) const {
    BaselineConfig bc;
    bc.n = static_cast<std::size_t>(n);
    bc.s = s;
    bc.trainer = trainer;
    bc.compute = compute;
    bc.compute.seed = mix_seed({run_seed, 0x64757261ULL});
    bc.latency = build_latency(mix_seed({run_seed, 0x6c6174ULL}));
    bc.seed = run_seed;
    bc.horizon = ms_to_us(horizon_ms);
    bc.max_rounds = max_rounds;
    bc.bytes_per_param = bytes_per_param;
    return bc;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config error: " + msg); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

FaultAction::Kind parse_action(const std::string& name) {
    if (name == "crash") return FaultAction::Kind::Crash;
    if (name == "recover") return FaultAction::Kind::Recover;
    if (name == "join") return FaultAction::Kind::Join;
    if (name == "leave") return FaultAction::Kind::Leave;
    fail("unknown fault action '" + name + "' (crash|recover|join|leave)");
}

// Largest batch of crash actions sharing one timestamp: the expected
// concurrent-failure count z that drives the a and sf defaults.
int max_concurrent_crashes(const std::vector<FaultAction>& faults) {
    std::map<SimTime, int> batches;
    for (const auto& f : faults)
        if (f.kind == FaultAction::Kind::Crash) ++batches[f.time];
    int z = 0;
    for (const auto& [t, c] : batches) z = std::max(z, c);
    return z;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }

    ScenarioConfig sc;

    const std::string method = get_or<std::string>(j, "method", "modest");
    if (method == "modest")
        sc.method = Method::Modest;
    else if (method == "fedavg")
        sc.method = Method::FedAvg;
    else if (method == "dsgd")
        sc.method = Method::Dsgd;
    else
        fail("unknown method '" + method + "' (modest|fedavg|dsgd)");

    sc.seed = get_or<std::uint64_t>(j, "seed", 1);
    if (j.contains("seeds")) {
        for (const auto& v : j.at("seeds")) sc.seeds.push_back(v.get<std::uint64_t>());
        if (sc.seeds.empty()) fail("'seeds' must be non-empty when present");
    } else {
        sc.seeds = {sc.seed};
    }

    sc.n = get_or<int>(j, "n", 0);
    if (sc.n < 1) fail("n must be >= 1");
    sc.s = get_or<int>(j, "s", 0);
    if (sc.s < 1) fail("s must be >= 1");
    if (sc.s > sc.n) fail("s must satisfy s <= n (trainers are drawn from the population)");

    if (j.contains("faults")) {
        for (const auto& f : j.at("faults")) {
            FaultAction fa;
            fa.time = ms_to_us(f.at("time_ms").get<double>());
            fa.kind = parse_action(f.at("action").get<std::string>());
            const int node = f.at("node").get<int>();
            if (node < 0 || node >= sc.n) fail("fault action node out of range");
            fa.node = static_cast<std::size_t>(node);
            if (fa.time < 0) fail("fault times must be non-negative");
            fa.node = static_cast<std::size_t>(node);
            sc.faults.push_back(fa);
        }
        std::stable_sort(sc.faults.begin(), sc.faults.end(),
                         [](const FaultAction& x, const FaultAction& y) { return x.time < y.time; });
    }

    const int z = max_concurrent_crashes(sc.faults);

    sc.a = get_or<int>(j, "a", z + 1);
    if (sc.a < 1) fail("a must be >= 1");
    if (sc.a > sc.s) fail("a must satisfy a <= s (aggregators are a subset of the training sample)");

    const double default_sf =
        z == 0 ? 1.0 : static_cast<double>(sc.s - z) / static_cast<double>(sc.s);
    sc.sf = get_or<double>(j, "sf", default_sf);
    if (!(sc.sf > 0.5 && sc.sf <= 1.0))
        fail("sf must satisfy 0.5 < sf <= 1 (got " + std::to_string(sc.sf) +
             "); raise s or lower the expected failure count");

    sc.delta_k = get_or<Round>(j, "delta_k", 0);
    if (sc.delta_k == 0) sc.delta_k = 2 * ((sc.n + sc.s - 1) / sc.s);
    if (sc.delta_k < 1) fail("delta_k must be >= 1");

    sc.horizon_ms = get_or<double>(j, "horizon_ms", 0.0);
    if (sc.horizon_ms <= 0) fail("horizon_ms must be positive");
    sc.max_rounds = get_or<Round>(j, "max_rounds", 0);
    sc.stall_window_ms = get_or<double>(j, "stall_window_ms", 0.0);
    sc.stop_at_target = get_or<bool>(j, "stop_at_target", true);
    sc.fixed_aggregator = get_or<bool>(j, "fixed_aggregator", false);
    sc.bytes_per_param = get_or<int>(j, "bytes_per_param", 4);
    if (sc.bytes_per_param < 1) fail("bytes_per_param must be >= 1");

    if (j.contains("task")) {
        const auto& t = j.at("task");
        sc.task.name = get_or<std::string>(t, "name", "linreg");
        if (sc.task.name != "linreg" && sc.task.name != "softmax_blobs")
            fail("unknown task '" + sc.task.name + "' (linreg|softmax_blobs)");
        sc.task.dim = get_or<int>(t, "dim", sc.task.dim);
        if (sc.task.dim < 1) fail("task.dim must be >= 1");
        sc.task.samples_per_node = get_or<int>(t, "samples_per_node", sc.task.samples_per_node);
        if (sc.task.samples_per_node < 1) fail("task.samples_per_node must be >= 1");
        sc.task.noise_sigma = get_or<double>(t, "noise_sigma", sc.task.noise_sigma);
        if (sc.task.noise_sigma < 0) fail("task.noise_sigma must be >= 0");
        sc.task.classes = get_or<int>(t, "classes", sc.task.classes);
        if (sc.task.name == "softmax_blobs" && sc.task.classes < 2) fail("task.classes must be >= 2");
        sc.task.separation = get_or<double>(t, "separation", sc.task.separation);
        sc.task.test_samples = get_or<int>(t, "test_samples", sc.task.test_samples);
        if (sc.task.test_samples < 1) fail("task.test_samples must be >= 1");
    }

    if (j.contains("partition")) {
        const auto& p = j.at("partition");
        const std::string scheme = get_or<std::string>(p, "scheme", "iid");
        if (scheme == "iid")
            sc.partition.scheme = PartitionSpec::Scheme::Iid;
        else if (scheme == "dirichlet")
            sc.partition.scheme = PartitionSpec::Scheme::Dirichlet;
        else
            fail("unknown partition scheme '" + scheme + "' (iid|dirichlet)");
        sc.partition.alpha = get_or<double>(p, "alpha", 0.5);
        if (sc.partition.scheme == PartitionSpec::Scheme::Dirichlet && sc.partition.alpha <= 0)
            fail("partition.alpha must be > 0");
    }

    if (j.contains("trainer")) {
        const auto& t = j.at("trainer");
        sc.trainer.learning_rate = get_or<double>(t, "learning_rate", sc.trainer.learning_rate);
        if (sc.trainer.learning_rate < 0) fail("trainer.learning_rate must be >= 0");
        sc.trainer.batch_size = get_or<int>(t, "batch_size", 20);
        if (sc.trainer.batch_size < 1) fail("trainer.batch_size must be >= 1");
        sc.trainer.local_epochs = get_or<int>(t, "local_epochs", 1);
        if (sc.trainer.local_epochs < 1) fail("trainer.local_epochs must be >= 1");
        sc.trainer.momentum = get_or<double>(t, "momentum", 0.0);
        if (sc.trainer.momentum < 0 || sc.trainer.momentum >= 1) fail("trainer.momentum must be in [0, 1)");
    } else {
        sc.trainer.batch_size = 20;
        sc.trainer.local_epochs = 1;
    }

    if (j.contains("latency")) {
        const auto& l = j.at("latency");
        sc.latency.kind = get_or<std::string>(l, "kind", "uniform");
        if (sc.latency.kind == "uniform") {
            sc.latency.lo_ms = get_or<double>(l, "lo_ms", 20.0);
            sc.latency.hi_ms = get_or<double>(l, "hi_ms", 200.0);
            if (sc.latency.lo_ms <= 0 || sc.latency.hi_ms < sc.latency.lo_ms)
                fail("latency bounds must satisfy 0 < lo_ms <= hi_ms");
        } else if (sc.latency.kind == "constant") {
            sc.latency.ms = get_or<double>(l, "ms", 100.0);
            if (sc.latency.ms <= 0) fail("latency.ms must be positive");
        } else if (sc.latency.kind == "matrix_csv") {
            sc.latency.path = get_or<std::string>(l, "path", "");
            if (sc.latency.path.empty()) fail("latency.path required for matrix_csv");
            sc.latency.rtt = get_or<bool>(l, "rtt", true);
        } else {
            fail("unknown latency kind '" + sc.latency.kind + "' (uniform|constant|matrix_csv)");
        }
    }

    if (j.contains("compute")) {
        const auto& c = j.at("compute");
        const std::string kind = get_or<std::string>(c, "kind", "constant");
        if (kind == "constant")
            sc.compute.kind = ComputeModel::Kind::Constant;
        else if (kind == "uniform")
            sc.compute.kind = ComputeModel::Kind::Uniform;
        else if (kind == "lognormal")
            sc.compute.kind = ComputeModel::Kind::LogNormal;
        else
            fail("unknown compute kind '" + kind + "' (constant|uniform|lognormal)");
        sc.compute.mean_ms = get_or<double>(c, "mean_ms", 500.0);
        sc.compute.lo_ms = get_or<double>(c, "lo_ms", sc.compute.mean_ms);
        sc.compute.hi_ms = get_or<double>(c, "hi_ms", sc.compute.mean_ms);
        sc.compute.sigma = get_or<double>(c, "sigma", 0.25);
        if (sc.compute.mean_ms <= 0) fail("compute.mean_ms must be positive");
        if (sc.compute.kind == ComputeModel::Kind::Uniform &&
            (sc.compute.lo_ms <= 0 || sc.compute.hi_ms < sc.compute.lo_ms))
            fail("compute bounds must satisfy 0 < lo_ms <= hi_ms");
    }

    if (j.contains("target")) {
        const auto& t = j.at("target");
        const std::string metric = get_or<std::string>(t, "metric", "loss");
        if (metric == "loss")
            sc.target_is_accuracy = false;
        else if (metric == "accuracy")
            sc.target_is_accuracy = true;
        else
            fail("unknown target metric '" + metric + "' (loss|accuracy)");
        if (!t.contains("value")) fail("target.value required when target present");
        sc.target_value = t.at("value").get<double>();
    }

    // dt default is per-run (2 x that run's max pairwise latency); resolve an
    // informational value here so `validate` can print it
    sc.delta_t_ms = get_or<double>(j, "delta_t_ms", 0.0);
    if (sc.delta_t_ms < 0) fail("delta_t_ms must be positive");
    sc.delta_t_explicit = sc.delta_t_ms > 0.0;
    if (!sc.delta_t_explicit) {
        const auto lat = sc.build_latency(mix_seed({sc.seed, 0x6c6174ULL}));
        sc.delta_t_ms = 2.0 * us_to_ms(lat.max_delay());
    }

    if (sc.method == Method::Modest && sc.fixed_aggregator && sc.a != 1)
        fail("fixed_aggregator emulation requires a = 1");

    return sc;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace modest
