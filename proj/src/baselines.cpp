#include "modest/baselines.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "modest/rng.hpp"
#include "modest/sampling.hpp"

namespace modest {

ExponentialGraphSchedule ExponentialGraphSchedule::build(std::size_t n) {
    if (n < 2) throw std::invalid_argument("exponential graph needs at least 2 nodes");
    ExponentialGraphSchedule g;
    g.n = n;
    for (std::size_t step = 1; step < n; step *= 2) {
        const std::size_t off = step % n;
        if (off != 0 && std::find(g.offsets.begin(), g.offsets.end(), off) == g.offsets.end())
            g.offsets.push_back(off);
    }
    return g;
}

std::size_t ExponentialGraphSchedule::peer_of(std::size_t node, Round k) const {
    const std::size_t off = offsets[static_cast<std::size_t>(k - 1) % offsets.size()];
    return (node + off) % n;
}

namespace {

std::vector<TrainerConfig> per_node_trainers(const BaselineConfig& cfg) {
    std::vector<TrainerConfig> out(cfg.n, cfg.trainer);
    for (std::size_t i = 0; i < cfg.n; ++i)
        out[i].seed = mix_seed({cfg.seed, 0x747261696eULL, i});  // "train"
    return out;
}

bool target_hit(const TargetSpec& target, const EvalResult& ev) {
    if (!target.enabled) return false;
    return target.higher_is_better ? ev.metric >= target.value : ev.loss <= target.value;
}

}  // namespace

RunResult run_fedavg(const BaselineConfig& cfg, const Task& task) {
    const std::size_t n = cfg.n;
    if (n == 0 || task.datasets.size() < n) throw std::invalid_argument("run_fedavg: task/n mismatch");

    auto metrics = std::make_unique<MetricsCollector>(n);
    if (cfg.target.enabled) metrics->set_target(cfg.target.value, cfg.target.higher_is_better);
    Simulation sim(n, cfg.latency, *metrics);

    const auto ids = make_node_ids(cfg.seed, n);
    const std::size_t server = cfg.latency.lowest_median_node();
    const auto trainers = per_node_trainers(cfg);

    RunResult result;
    result.metrics = std::move(metrics);
    result.server_node = server;

    struct ServerState {
        Round k = 0;
        std::shared_ptr<const Model> global;
        std::map<NodeId, std::shared_ptr<const Model>> returned;
        std::size_t expected = 0;
    } srv;

    std::vector<std::shared_ptr<const Model>> assignment(n);

    auto model_bytes = [&](const Model& m) {
        return TransferBytes{m.byte_size(cfg.bytes_per_param), cfg.header_bytes};
    };

    std::function<void(Round)> start_round = [&](Round k) {
        srv.k = k;
        srv.returned.clear();
        // server picks whoever is reachable; ranking doubles as the per-round
        // uniform sampler
        std::vector<NodeId> live;
        for (std::size_t i = 0; i < n; ++i)
            if (sim.up(i)) live.push_back(ids[i]);
        const auto sample = rank_candidates(live, k).head(static_cast<std::size_t>(cfg.s));
        srv.expected = sample.size();
        result.metrics->round_started(k, sim.now());
        result.metrics->trainers_selected(k, sample.size());
        sim.mark_round_progress(k);
        for (const NodeId& j : sample) {
            const auto target_idx =
                static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), j) - ids.begin());
            Message msg;
            msg.kind = Message::Kind::Assign;
            msg.round = k;
            msg.model = srv.global;
            result.metrics->count_train_msg(k);
            sim.send(server, target_idx, std::move(msg), model_bytes(*srv.global));
        }
    };

    auto finish_round = [&](Round k) {
        std::vector<const Model*> models;
        for (const auto& [sender, m] : srv.returned) models.push_back(m.get());
        auto aggregated = std::make_shared<const Model>(aggregate_models(models));
        const EvalResult ev = evaluate(*aggregated, task.test, task.kind);
        result.metrics->round_metric(k + 1, sim.now(), ev.loss, ev.metric);
        if (cfg.record_round_models) result.round_models.emplace(k + 1, *aggregated);
        srv.global = std::move(aggregated);
        if (cfg.target.enabled && target_hit(cfg.target, ev)) {
            sim.request_stop("target reached at round " + std::to_string(k + 1));
            return;
        }
        if (cfg.max_rounds > 0 && k + 1 >= cfg.max_rounds) {
            sim.request_stop("round cap reached");
            return;
        }
        start_round(k + 1);
    };

    Simulation::Hooks hooks;
    hooks.on_message = [&](std::size_t self, std::size_t from, const Message& msg) {
        (void)from;
        if (msg.kind == Message::Kind::Assign) {
            assignment[self] = msg.model;
            sim.schedule_compute(self, cfg.compute.duration(self, msg.round),
                                 static_cast<std::uint64_t>(msg.round));
        } else if (msg.kind == Message::Kind::Return && self == server) {
            if (msg.round != srv.k) return;  // straggler from a finished round
            srv.returned[ids[from]] = msg.model;
            if (srv.returned.size() >= srv.expected) finish_round(msg.round);
        }
    };
    hooks.on_compute = [&](std::size_t self, std::uint64_t token) {
        const Round k = static_cast<Round>(token);
        auto trained =
            std::make_shared<const Model>(local_train(*assignment[self], task.datasets[self], trainers[self], task.kind));
        assignment[self].reset();
        Message msg;
        msg.kind = Message::Kind::Return;
        msg.round = k;
        msg.model = trained;
        result.metrics->count_aggregate_msg(k);
        sim.send(self, server, std::move(msg), model_bytes(*trained));
    };
    sim.set_hooks(std::move(hooks));

    srv.global = std::make_shared<const Model>(task.init_model(cfg.seed));
    {
        const EvalResult ev = evaluate(*srv.global, task.test, task.kind);
        result.metrics->round_metric(1, 0, ev.loss, ev.metric);
        if (cfg.record_round_models) result.round_models.emplace(1, *srv.global);
    }
    start_round(1);

    result.outcome = sim.run(cfg.horizon);
    return result;
}

RunResult run_dsgd(const BaselineConfig& cfg, const Task& task) {
    const std::size_t n = cfg.n;
    if (n < 2 || task.datasets.size() < n) throw std::invalid_argument("run_dsgd: task/n mismatch");

    auto metrics = std::make_unique<MetricsCollector>(n);
    if (cfg.target.enabled) metrics->set_target(cfg.target.value, cfg.target.higher_is_better);
    Simulation sim(n, cfg.latency, *metrics);

    const auto ids = make_node_ids(cfg.seed, n);
    const auto graph = ExponentialGraphSchedule::build(n);
    const auto trainers = per_node_trainers(cfg);

    RunResult result;
    result.metrics = std::move(metrics);

    std::vector<Model> local(n, task.init_model(cfg.seed));
    std::vector<std::shared_ptr<const Model>> trained(n);
    std::vector<std::shared_ptr<const Model>> received(n);
    std::size_t done_count = 0;
    Round round = 0;

    auto model_bytes = [&](const Model& m) {
        return TransferBytes{m.byte_size(cfg.bytes_per_param), cfg.header_bytes};
    };

    std::function<void(Round)> start_round;

    // a node is round-done once it holds both its own trained model and the
    // neighbour's; the round barrier releases when all n are done
    auto maybe_node_done = [&](std::size_t i) {
        if (!trained[i] || !received[i]) return;
        local[i].params.resize(trained[i]->params.size());
        for (std::size_t p = 0; p < local[i].params.size(); ++p)
            local[i].params[p] = 0.5 * (trained[i]->params[p] + received[i]->params[p]);
        trained[i].reset();
        received[i].reset();
        if (++done_count < n) return;

        const DsgdReport rep = dsgd_report(local, task.test, task.kind);
        result.metrics->round_metric(round, sim.now(), rep.mean_loss, rep.mean_metric);
        const bool hit = cfg.target.enabled && (cfg.target.higher_is_better ? rep.mean_metric >= cfg.target.value
                                                                            : rep.mean_loss <= cfg.target.value);
        if (hit) {
            sim.request_stop("target reached at round " + std::to_string(round));
            return;
        }
        if (cfg.max_rounds > 0 && round >= cfg.max_rounds) {
            sim.request_stop("round cap reached");
            return;
        }
        start_round(round + 1);
    };

    start_round = [&](Round k) {
        round = k;
        done_count = 0;
        result.metrics->round_started(k, sim.now());
        result.metrics->trainers_selected(k, n);
        sim.mark_round_progress(k);
        for (std::size_t i = 0; i < n; ++i)
            sim.schedule_compute(i, cfg.compute.duration(i, k), static_cast<std::uint64_t>(k));
    };

    Simulation::Hooks hooks;
    hooks.on_compute = [&](std::size_t self, std::uint64_t token) {
        const Round k = static_cast<Round>(token);
        auto m = std::make_shared<const Model>(local_train(local[self], task.datasets[self], trainers[self], task.kind));
        trained[self] = m;
        const std::size_t peer = graph.peer_of(self, k);
        Message msg;
        msg.kind = Message::Kind::PeerModel;
        msg.round = k;
        msg.model = m;
        result.metrics->count_train_msg(k);
        sim.send(self, peer, std::move(msg), model_bytes(*m));
        maybe_node_done(self);
    };
    hooks.on_message = [&](std::size_t self, std::size_t from, const Message& msg) {
        (void)from;
        if (msg.kind != Message::Kind::PeerModel) return;
        received[self] = msg.model;
        maybe_node_done(self);
    };
    sim.set_hooks(std::move(hooks));

    (void)ids;
    start_round(1);
    result.outcome = sim.run(cfg.horizon);
    result.final_local_models = local;
    return result;
}

DsgdReport dsgd_report(const std::vector<Model>& models, const LocalDataset& test, TaskKind kind) {
    DsgdReport rep;
    if (models.empty()) return rep;
    std::vector<EvalResult> evals;
    evals.reserve(models.size());
    for (const Model& m : models) evals.push_back(evaluate(m, test, kind));
    const double inv = 1.0 / static_cast<double>(models.size());
    for (const auto& e : evals) {
        rep.mean_loss += e.loss * inv;
        rep.mean_metric += e.metric * inv;
    }
    for (const auto& e : evals) {
        rep.std_loss += (e.loss - rep.mean_loss) * (e.loss - rep.mean_loss) * inv;
        rep.std_metric += (e.metric - rep.mean_metric) * (e.metric - rep.mean_metric) * inv;
    }
    rep.std_loss = std::sqrt(rep.std_loss);
    rep.std_metric = std::sqrt(rep.std_metric);
    return rep;
}

double consensus_distance(const std::vector<Model>& models) {
    if (models.size() < 2) return 0.0;
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            double d2 = 0.0;
            for (std::size_t p = 0; p < models[i].params.size(); ++p) {
                const double d = models[i].params[p] - models[j].params[p];
                d2 += d * d;
            }
            acc += std::sqrt(d2);
            ++pairs;
        }
    }
    return acc / static_cast<double>(pairs);
}

}  // namespace modest
