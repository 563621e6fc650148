#include "modest/runner.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <sstream>
#include <stdexcept>

#include "modest/rng.hpp"

namespace modest {

SimTime ComputeModel::duration(std::size_t node, Round k) const {
    Rng rng(mix_seed({seed, 0x636f6d70757465ULL, node, static_cast<std::uint64_t>(k)}));  // "compute"
    double ms = mean_ms;
    switch (kind) {
        case Kind::Constant:
            break;
        case Kind::Uniform:
            ms = rng.uniform(lo_ms, hi_ms);
            break;
        case Kind::LogNormal:
            ms = rng.lognormal(std::log(mean_ms), sigma);
            break;
    }
    return std::max<SimTime>(1, ms_to_us(ms));
}

namespace {

std::vector<NodeId> pick_bootstrap_peers(const std::vector<NodeId>& members, const NodeId& self,
                                         std::size_t count, std::uint64_t seed) {
    std::vector<NodeId> pool;
    for (const NodeId& j : members)
        if (!(j == self)) pool.push_back(j);
    Rng rng(seed);
    rng.shuffle(pool);
    if (pool.size() > count) pool.resize(count);
    return pool;
}

}  // namespace

RunResult run_modest(const ModestRunConfig& cfg, const Task& task) {
    const std::size_t n = cfg.n;
    if (n == 0 || task.datasets.size() < n) throw std::invalid_argument("run_modest: task/n mismatch");
    const std::size_t initial = cfg.initial_members == 0 ? n : cfg.initial_members;

    auto metrics = std::make_unique<MetricsCollector>(n);
    if (cfg.target.enabled) metrics->set_target(cfg.target.value, cfg.target.higher_is_better);
    Simulation sim(n, cfg.latency, *metrics);

    const auto ids = make_node_ids(cfg.seed, n);
    std::map<NodeId, std::size_t> index_of;
    for (std::size_t i = 0; i < n; ++i) index_of.emplace(ids[i], i);

    RunResult result;
    result.metrics = std::move(metrics);

    // per-node deterministic trainer streams
    std::vector<TrainerConfig> trainer_cfgs(n, cfg.trainer);
    for (std::size_t i = 0; i < n; ++i)
        trainer_cfgs[i].seed = mix_seed({cfg.seed, 0x747261696eULL, i});  // "train"

    // propagation tracking state
    std::set<NodeId> tracked_joiners;
    std::set<std::pair<NodeId, NodeId>> inclusion_seen;

    // crash bookkeeping for the candidate-exclusion check
    std::set<NodeId> crashed_ids;

    ModestNode::Env env;
    env.index_of = [&index_of](const NodeId& j) { return index_of.at(j); };
    env.id_of = [&ids](std::size_t i) { return ids[i]; };
    env.train = [&](std::size_t node, Round k, const Model& in) {
        (void)k;
        return local_train(in, task.datasets[node], trainer_cfgs[node], task.kind);
    };
    env.train_duration = [&](std::size_t node, Round k) { return cfg.compute.duration(node, k); };
    env.on_aggregate_ready = [&](Round k, const Model& aggregated, SimTime now) {
        auto& collector = *result.metrics;
        const bool already = collector.rounds().count(k) && collector.rounds().at(k).has_metric;
        if (already) return;
        const EvalResult ev = evaluate(aggregated, task.test, task.kind);
        collector.round_metric(k, now, ev.loss, ev.metric);
        if (cfg.record_round_models) result.round_models.emplace(k, aggregated);
        if (cfg.target.enabled && cfg.target.stop_on_hit && collector.time_to_target())
            sim.request_stop("target reached at round " + std::to_string(k));
        else if (cfg.max_rounds > 0 && k >= cfg.max_rounds)
            sim.request_stop("round cap reached");
    };
    env.on_sample_begin = [&](std::size_t node, Round k, const std::vector<NodeId>& cands) {
        (void)node;
        if (crashed_ids.empty()) return;
        if (k < result.last_crash_round + cfg.protocol.dk) return;
        for (const NodeId& j : cands)
            if (crashed_ids.count(j)) ++result.candidate_violations;
    };

    std::vector<std::unique_ptr<ModestNode>> nodes;
    nodes.reserve(n);

    env.on_view_changed = [&](std::size_t node) {
        if (tracked_joiners.empty()) return;
        const NodeId observer = ids[node];
        for (const NodeId& joiner : tracked_joiners) {
            if (joiner == observer) continue;
            if (inclusion_seen.count({joiner, observer})) continue;
            if (!nodes[node]->view().registry.find(joiner)) continue;
            inclusion_seen.insert({joiner, observer});
            result.metrics->view_inclusion(joiner, observer, sim.now(), sim.max_round_started());
        }
    };

    std::vector<NodeId> initial_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(initial));
    for (std::size_t i = 0; i < n; ++i) {
        auto node = std::make_unique<ModestNode>(i, ids[i], cfg.protocol, sim, &env);
        auto peers = pick_bootstrap_peers(initial_ids, ids[i], static_cast<std::size_t>(cfg.protocol.s),
                                          mix_seed({cfg.seed, 0x626f6f74ULL, i}));  // "boot"
        if (i < initial)
            node->init_full_view(initial_ids, std::move(peers));
        else
            node->identity_bootstrap(std::move(peers));
        nodes.push_back(std::move(node));
    }
    for (std::size_t i = initial; i < n; ++i) sim.set_up(i, false);

    Simulation::Hooks hooks;
    hooks.on_message = [&](std::size_t self, std::size_t from, const Message& msg) {
        nodes[self]->on_message(from, msg);
    };
    hooks.on_timer = [&](std::size_t self, std::uint64_t tag) { nodes[self]->on_timer(tag); };
    hooks.on_compute = [&](std::size_t self, std::uint64_t token) { nodes[self]->on_compute_done(token); };
    hooks.on_fault = [&](const FaultAction& action) {
        switch (action.kind) {
            case FaultAction::Kind::Crash:
                crashed_ids.insert(ids[action.node]);
                result.last_crash_round = std::max(result.last_crash_round, sim.max_round_started());
                break;
            case FaultAction::Kind::Recover:
                crashed_ids.erase(ids[action.node]);
                nodes[action.node]->on_recovered();
                break;
            case FaultAction::Kind::Join: {
                sim.recover(action.node);
                result.metrics->join_observed(ids[action.node], sim.now(), sim.max_round_started());
                tracked_joiners.insert(ids[action.node]);
                auto& observers = result.join_observers[ids[action.node]];
                for (std::size_t i = 0; i < n; ++i)
                    if (i != action.node && sim.up(i)) observers.push_back(ids[i]);
                nodes[action.node]->request_join();
                nodes[action.node]->on_joined_session();
                break;
            }
            case FaultAction::Kind::Leave:
                nodes[action.node]->request_leave();
                sim.crash(action.node);
                break;
        }
    };
    sim.set_hooks(std::move(hooks));
    sim.apply(cfg.faults);

    const SimTime window = cfg.stall_window > 0 ? cfg.stall_window : 10 * cfg.protocol.dt;
    sim.enable_stall_detection(window, [&]() {
        std::ostringstream os;
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (!sim.up(i)) continue;
            const std::string brief = nodes[i]->diagnostic_brief();
            if (brief.empty()) continue;
            if (!first) os << "; ";
            first = false;
            os << brief;
        }
        return os.str();
    });

    auto init_model = std::make_shared<const Model>(task.init_model(cfg.seed));
    for (std::size_t i = 0; i < initial; ++i) nodes[i]->bootstrap_first_sample(init_model);

    result.outcome = sim.run(cfg.horizon);
    result.final_k_train.reserve(n);
    for (const auto& node : nodes) result.final_k_train.push_back(node->k_train());
    return result;
}

}  // namespace modest
