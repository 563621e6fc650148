// Scenario runner: executes decentralized-sampling training (and the
// coordinator / gossip-averaging baselines) on the virtual-time network
// simulator and exports the metrics of each run.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "modest/rng.hpp"
#include "modest/scenario.hpp"

namespace {

using namespace modest;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStall = 2;

struct RunArtifacts {
    RunResult result;
    MetricsCollector::Summary summary;
};

RunArtifacts execute(const ScenarioConfig& sc, std::uint64_t run_seed) {
    const Task task = sc.build_task(mix_seed({run_seed, 0x7461736bULL}));  // "task"
    const TargetSpec target = resolve_target(sc, task);
    RunResult result;
    switch (sc.method) {
        case Method::Modest: {
            auto rc = sc.to_modest_run(run_seed);
            rc.target = target;
            result = run_modest(rc, task);
            break;
        }
        case Method::FedAvg:
        case Method::Dsgd: {
            auto bc = sc.to_baseline_run(run_seed);
            bc.target = target;
            result = sc.method == Method::FedAvg ? run_fedavg(bc, task) : run_dsgd(bc, task);
            break;
        }
    }
    RunArtifacts a{std::move(result), {}};
    a.summary = a.result.metrics->summary();
    return a;
}

std::string outcome_name(StopKind k) {
    switch (k) {
        case StopKind::Quiescent:
            return "quiescent";
        case StopKind::Horizon:
            return "horizon";
        case StopKind::Stopped:
            return "stopped";
        case StopKind::Stalled:
            return "stalled";
    }
    return "?";
}

std::string run_summary_extra(const ScenarioConfig& sc, const RunArtifacts& a, std::uint64_t run_seed) {
    std::ostringstream os;
    os << "  \"method\": \"" << method_name(sc.method) << "\",\n";
    os << "  \"seed\": " << run_seed << ",\n";
    os << "  \"outcome\": \"" << outcome_name(a.result.outcome.kind) << "\",\n";
    os << "  \"end_time_ms\": " << us_to_ms(a.result.outcome.end_time);
    if (!a.result.outcome.detail.empty()) {
        std::string d = a.result.outcome.detail;
        for (auto& c : d)
            if (c == '"') c = '\'';
        os << ",\n  \"detail\": \"" << d << "\"";
    }
    return os.str();
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed_override) {
    ScenarioConfig sc = load_scenario(config_path);
    if (seed_override) {
        sc.seed = *seed_override;
        sc.seeds = {*seed_override};
    }
    const RunArtifacts a = execute(sc, sc.seed);
    a.result.metrics->export_run(out_dir, run_summary_extra(sc, a, sc.seed));
    std::cout << "method=" << method_name(sc.method) << " seed=" << sc.seed
              << " outcome=" << outcome_name(a.result.outcome.kind)
              << " end_ms=" << us_to_ms(a.result.outcome.end_time) << " max_round=" << a.summary.max_round
              << " total_bytes=" << a.summary.total_bytes << "\n";
    if (!a.result.outcome.detail.empty()) std::cout << a.result.outcome.detail << "\n";
    return a.result.outcome.kind == StopKind::Stalled ? kExitStall : kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, const std::vector<int>& grid_s,
              const std::vector<int>& grid_a) {
    ScenarioConfig base = load_scenario(config_path);
    const std::vector<int> ss = grid_s.empty() ? std::vector<int>{base.s} : grid_s;
    const std::vector<int> as = grid_a.empty() ? std::vector<int>{base.a} : grid_a;

    std::filesystem::create_directories(out_dir);
    std::ofstream csv(std::filesystem::path(out_dir) / "sweep.csv", std::ios::binary);
    csv << "s,a,seed,rounds_to_target,vtime_to_target_ms,outcome\n";
    bool stalled = false;
    for (int s : ss) {
        for (int a : as) {
            ScenarioConfig sc = base;
            sc.s = s;
            sc.a = a;
            if (a > s) continue;  // grid cells violating a <= s are skipped
            if (s > sc.n) continue;
            for (std::uint64_t seed : sc.seeds) {
                const RunArtifacts art = execute(sc, seed);
                stalled = stalled || art.result.outcome.kind == StopKind::Stalled;
                csv << s << "," << a << "," << seed << ","
                    << (art.summary.rounds_to_target ? std::to_string(*art.summary.rounds_to_target) : "")
                    << ","
                    << (art.summary.time_to_target ? std::to_string(us_to_ms(*art.summary.time_to_target))
                                                   : "")
                    << "," << outcome_name(art.result.outcome.kind) << "\n";
                std::cout << "s=" << s << " a=" << a << " seed=" << seed << " rounds="
                          << (art.summary.rounds_to_target ? std::to_string(*art.summary.rounds_to_target)
                                                           : "-")
                          << "\n";
            }
        }
    }
    return stalled ? kExitStall : kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override) {
    ScenarioConfig sc = load_scenario(config_path);
    if (seed_override) sc.seed = *seed_override;

    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "comparison.json", std::ios::binary);
    out << "{\n";
    bool stalled = false;
    MetricsCollector::Summary summaries[3];
    const Method methods[3] = {Method::Modest, Method::FedAvg, Method::Dsgd};
    for (int i = 0; i < 3; ++i) {
        ScenarioConfig m = sc;
        m.method = methods[i];
        const RunArtifacts a = execute(m, sc.seed);  // shared seed: same task/latency draws
        summaries[i] = a.summary;
        stalled = stalled || a.result.outcome.kind == StopKind::Stalled;
        a.result.metrics->export_run(out_dir + "/" + method_name(methods[i]),
                                     run_summary_extra(m, a, sc.seed));
        const auto& s = summaries[i];
        out << "  \"" << method_name(methods[i]) << "\": {\n";
        out << "    \"total_bytes\": " << s.total_bytes << ",\n";
        out << "    \"model_bytes\": " << s.model_bytes << ",\n";
        out << "    \"min_node_bytes\": " << s.min_node_bytes << ",\n";
        out << "    \"max_node_bytes\": " << s.max_node_bytes << ",\n";
        out << "    \"overhead_share\": " << s.overhead_share << ",\n";
        out << "    \"time_to_target_ms\": "
            << (s.time_to_target ? std::to_string(us_to_ms(*s.time_to_target)) : "null") << ",\n";
        out << "    \"rounds_to_target\": "
            << (s.rounds_to_target ? std::to_string(*s.rounds_to_target) : "null") << ",\n";
        out << "    \"outcome\": \"" << outcome_name(a.result.outcome.kind) << "\"\n";
        out << "  },\n";
        std::cout << method_name(methods[i]) << ": total=" << s.total_bytes
                  << " max_node=" << s.max_node_bytes << " t_target_ms="
                  << (s.time_to_target ? std::to_string(us_to_ms(*s.time_to_target)) : "-") << "\n";
    }
    const double dsgd_over_modest =
        summaries[0].model_bytes > 0
            ? static_cast<double>(summaries[2].model_bytes) / static_cast<double>(summaries[0].model_bytes)
            : 0.0;
    out << "  \"dsgd_over_modest_model_bytes\": " << dsgd_over_modest << "\n}\n";
    std::cout << "dsgd/modest model-byte ratio: " << dsgd_over_modest << "\n";
    return stalled ? kExitStall : kExitOk;
}

int cmd_validate(const std::string& config_path) {
    const ScenarioConfig sc = load_scenario(config_path);
    std::cout << "config ok: method=" << method_name(sc.method) << " n=" << sc.n << " s=" << sc.s
              << " a=" << sc.a << " sf=" << sc.sf << " delta_t_ms=" << sc.delta_t_ms
              << (sc.delta_t_explicit ? "" : " (derived)") << " delta_k=" << sc.delta_k
              << " faults=" << sc.faults.size() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized-sampling training simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::vector<int> grid_s, grid_a;

    auto* run = app.add_subcommand("run", "execute one scenario and export metrics");
    run->add_option("--config", config_path, "scenario JSON")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "override the scenario seed");

    auto* sweep = app.add_subcommand("sweep", "grid of (s, a) cells, one run per cell per seed");
    sweep->add_option("--config", config_path, "scenario JSON")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--grid-s", grid_s, "sample sizes to sweep")->delimiter(',');
    sweep->add_option("--grid-a", grid_a, "aggregator counts to sweep")->delimiter(',');

    auto* compare = app.add_subcommand("compare", "run all three methods with shared task/latency seeds");
    compare->add_option("--config", config_path, "scenario JSON")->required();
    compare->add_option("--out", out_dir, "output directory");
    compare->add_option("--seed", seed, "override the scenario seed");

    auto* validate = app.add_subcommand("validate", "parse and validate a scenario config");
    validate->add_option("--config", config_path, "scenario JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, seed);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, grid_s, grid_a);
        if (compare->parsed()) return cmd_compare(config_path, out_dir, seed);
        if (validate->parsed()) return cmd_validate(config_path);
    } catch (const modest::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
