#include "modest/protocol.hpp"

#include <algorithm>
#include <cassert>

#include "modest/rng.hpp"
#include <cmath>
#include <sstream>

namespace modest {

namespace {

// Timer tag layout: [63..62] kind, [61] purpose, [60..20] round, [19..0] node index.
constexpr std::uint64_t kTagKindPing = 0;
constexpr std::uint64_t kTagKindRetry = 1;
constexpr std::uint64_t kTagKindRejoin = 2;

std::uint64_t make_tag(std::uint64_t kind, std::uint64_t purpose, Round round, std::size_t node) {
    return (kind << 62) | (purpose << 61) | (static_cast<std::uint64_t>(round) << 20) |
           static_cast<std::uint64_t>(node);
}

struct TagFields {
    std::uint64_t kind = 0;
    std::uint64_t purpose = 0;
    Round round = 0;
    std::size_t node = 0;
};

TagFields split_tag(std::uint64_t tag) {
    TagFields f;
    f.kind = tag >> 62;
    f.purpose = (tag >> 61) & 1;
    f.round = static_cast<Round>((tag >> 20) & ((std::uint64_t{1} << 41) - 1));
    f.node = static_cast<std::size_t>(tag & 0xfffff);
    return f;
}

}  // namespace

int ProtocolConfig::aggregation_threshold() const {
    const int t = static_cast<int>(std::ceil(sf * static_cast<double>(s) - 1e-9));
    return std::max(1, t);
}

ModestNode::ModestNode(std::size_t index, NodeId id, ProtocolConfig cfg, Simulation& sim, Env* env)
    : index_(index), cfg_(cfg), sim_(sim), env_(env) {
    ident_.self = id;
}

void ModestNode::init_full_view(const std::vector<NodeId>& members, std::vector<NodeId> bootstrap_peers) {
    for (const NodeId& j : members) {
        view_.registry.update(j, 1, EventKind::Joined);
        view_.activity.update(j, 0);
    }
    ident_.persistent_counter = 1;
    ident_.bootstrap_peers = std::move(bootstrap_peers);
    arm_rejoin_check();
}

void ModestNode::identity_bootstrap(std::vector<NodeId> bootstrap_peers) {
    ident_.bootstrap_peers = std::move(bootstrap_peers);
}

void ModestNode::on_joined_session() {
    last_heard_ = sim_.now();
    arm_rejoin_check();
}

std::shared_ptr<const View> ModestNode::view_snapshot() const { return std::make_shared<View>(view_); }

void ModestNode::bootstrap_first_sample(std::shared_ptr<const Model> init_model) {
    const auto initial = view_.registry.registered();
    const auto s1 = rank_candidates(initial, 1).head(static_cast<std::size_t>(cfg_.s));
    if (std::find(s1.begin(), s1.end(), ident_.self) == s1.end()) return;
    Message msg;
    msg.kind = Message::Kind::Train;
    msg.round = 1;
    msg.model = std::move(init_model);
    msg.view = view_snapshot();
    // local kick-off, not a network transfer
    sim_.send(index_, index_, std::move(msg), TransferBytes{});
}

void ModestNode::merge_incoming_view(const Message& msg, Round k) {
    if (msg.view) view_.merge(*msg.view);
    view_.activity.update(ident_.self, k);
    if (env_->on_view_changed) env_->on_view_changed(index_);
}

void ModestNode::record_rate_observation(Round k) {
    if (k <= last_rate_round_) return;
    last_rate_round_ = k;
    const bool had_estimate = rejoin_silence_budget(rate_obs_, cfg_.dk).has_value();
    rate_obs_.push_back(Activation{sim_.now(), k});
    if (!had_estimate) arm_rejoin_check();  // afterwards the timer re-arms itself
}

void ModestNode::record_activation(Round k) {
    record_rate_observation(k);
    if (k > last_activation_round_) last_activation_round_ = k;
}

SimTime ModestNode::silence_budget() const {
    // Before a node has two activations it cannot estimate the round rate;
    // fall back to dk rounds of a few probe timeouts each, the only
    // timescale a never-selected node knows. Spurious fires are cheap (s
    // joined messages) and any received message resets the silence clock.
    return rejoin_silence_budget(rate_obs_, cfg_.dk).value_or(cfg_.dk * 4 * cfg_.dt);
}

void ModestNode::arm_rejoin_check() {
    sim_.set_timer(index_, silence_budget() + 1, make_tag(kTagKindRejoin, 0, 0, 0));
}

void ModestNode::on_message(std::size_t from, const Message& msg) {
    // the silence clock counts traffic that proves some sampler still
    // considers this node; join/leave chatter from third parties does not
    if (msg.kind != Message::Kind::Joined && msg.kind != Message::Kind::Left) last_heard_ = sim_.now();
    switch (msg.kind) {
        case Message::Kind::Ping: {
            record_rate_observation(msg.round);
            Message pong;
            pong.kind = Message::Kind::Pong;
            pong.round = msg.round;
            sim_.send(index_, from, std::move(pong), TransferBytes{0, cfg_.control_msg_bytes});
            return;
        }
        case Message::Kind::Pong: {
            const NodeId sender = env_->id_of(from);
            for (auto purpose : {Purpose::Trainers, Purpose::Aggregators}) {
                const SampleKey key{static_cast<std::uint8_t>(purpose), msg.round};
                auto it = samples_.find(key);
                if (it == samples_.end() || it->second.waiting_retry) continue;
                process_step(purpose, msg.round, it->second.request.on_pong(sender));
            }
            return;
        }
        case Message::Kind::Joined:
            handle_joined(view_, env_->id_of(from), msg.counter);
            if (env_->on_view_changed) env_->on_view_changed(index_);
            return;
        case Message::Kind::Left:
            handle_left(view_, env_->id_of(from), msg.counter);
            if (env_->on_view_changed) env_->on_view_changed(index_);
            return;
        case Message::Kind::Train:
            handle_train(from, msg);
            return;
        case Message::Kind::Aggregate:
            handle_aggregate(from, msg);
            return;
        default:
            return;  // baseline message kinds are never routed here
    }
}

void ModestNode::handle_train(std::size_t from, const Message& msg) {
    (void)from;
    const Round k = msg.round;
    merge_incoming_view(msg, k);
    sim_.metrics().round_started(k, sim_.now());
    record_activation(k);

    if (k > k_train_) {
        k_train_ = k;
        cancel_training();
        sim_.mark_round_progress(k);
    }
    if (k < k_train_) return;  // stale, view already merged
    if (training_active_) return;  // duplicate from a slower aggregator
    if (last_training_started_ >= k) return;  // already trained this round

    training_active_ = true;
    training_round_ = k;
    last_training_started_ = k;
    training_input_ = msg.model;
    sim_.schedule_compute(index_, env_->train_duration(index_, k), static_cast<std::uint64_t>(k));
}

void ModestNode::on_compute_done(std::uint64_t token) {
    const Round k = static_cast<Round>(token);
    if (!training_active_ || training_round_ != k) return;  // cancelled
    training_active_ = false;

    auto trained = std::make_shared<const Model>(env_->train(index_, k, *training_input_));
    training_input_.reset();

    const Round next = k + 1;
    if (cfg_.fixed_aggregator) {
        // coordinator emulation: no aggregator sampling
        send_model(Message::Kind::Aggregate, next, trained, {env_->id_of(cfg_.fixed_aggregator_node)});
        return;
    }
    outbox_aggregate_[next] = std::move(trained);
    begin_sample(Purpose::Aggregators, next, static_cast<std::size_t>(cfg_.a), std::nullopt);
}

void ModestNode::handle_aggregate(std::size_t from, const Message& msg) {
    const Round k = msg.round;
    merge_incoming_view(msg, k);
    sim_.metrics().round_started(k, sim_.now());
    record_activation(k);

    if (k > k_agg_) {
        k_agg_ = k;
        pending_models_.clear();
        pending_models_[env_->id_of(from)] = msg.model;
    } else if (k == k_agg_) {
        pending_models_[env_->id_of(from)] = msg.model;  // dedup by sender
    } else {
        return;  // stale, safely ignored
    }
    maybe_trigger_aggregation();
}

void ModestNode::maybe_trigger_aggregation() {
    if (k_agg_ <= last_agg_broadcast_) return;  // one broadcast per round
    if (pending_models_.size() < static_cast<std::size_t>(cfg_.aggregation_threshold())) return;

    last_agg_broadcast_ = k_agg_;
    std::vector<const Model*> models;
    models.reserve(pending_models_.size());
    for (const auto& [sender, m] : pending_models_) models.push_back(m.get());
    auto aggregated = std::make_shared<const Model>(aggregate_models(models));
    pending_models_.clear();

    sim_.mark_round_progress(k_agg_);
    sim_.metrics().aggregator_completed(k_agg_);
    if (env_->on_aggregate_ready) env_->on_aggregate_ready(k_agg_, *aggregated, sim_.now());

    outbox_train_[k_agg_] = std::move(aggregated);
    begin_sample(Purpose::Trainers, k_agg_, static_cast<std::size_t>(cfg_.s), std::nullopt);
}

void ModestNode::begin_sample(Purpose purpose, Round round, std::size_t size,
                              std::optional<SimTime> first_begin) {
    const auto cands = candidates(view_, round, cfg_.dk);
    if (env_->on_sample_begin) env_->on_sample_begin(index_, round, cands);

    const SampleKey key{static_cast<std::uint8_t>(purpose), round};
    auto it = samples_.find(key);
    if (it == samples_.end()) {
        it = samples_.emplace(key, ActiveSample{SampleRequest(rank_candidates(cands, round), size),
                                                first_begin.value_or(sim_.now()), 1, false})
                 .first;
    } else {
        const int attempt = it->second.attempt + 1;
        const SimTime began = it->second.first_begin;
        it->second = ActiveSample{SampleRequest(rank_candidates(cands, round), size), began, attempt, false};
    }
    process_step(purpose, round, it->second.request.begin());
}

void ModestNode::process_step(Purpose purpose, Round round, const SampleRequest::Step& step) {
    for (const NodeId& j : step.pings) {
        Message ping;
        ping.kind = Message::Kind::Ping;
        ping.round = round;
        const std::size_t target = env_->index_of(j);
        sim_.send(index_, target, std::move(ping), TransferBytes{0, cfg_.control_msg_bytes});
        sim_.set_timer(index_, cfg_.dt,
                       make_tag(kTagKindPing, static_cast<std::uint64_t>(purpose), round, target));
    }
    if (step.completed) {
        const SampleKey key{static_cast<std::uint8_t>(purpose), round};
        auto it = samples_.find(key);
        sim_.metrics().sample_duration(round, sim_.now() - it->second.first_begin);
        samples_.erase(it);
        deliver_completed_sample(purpose, round, step.sample);
        return;
    }
    if (step.stalled) {
        const SampleKey key{static_cast<std::uint8_t>(purpose), round};
        auto it = samples_.find(key);
        it->second.waiting_retry = true;
        sim_.set_timer(index_, sample_retry_delay(cfg_.dt, it->second.attempt),
                       make_tag(kTagKindRetry, static_cast<std::uint64_t>(purpose), round, 0));
    }
}

void ModestNode::deliver_completed_sample(Purpose purpose, Round round, const std::vector<NodeId>& sample) {
    if (purpose == Purpose::Trainers) {
        auto it = outbox_train_.find(round);
        if (it == outbox_train_.end()) return;
        sim_.metrics().trainers_selected(round, sample.size());
        send_model(Message::Kind::Train, round, it->second, sample);
        outbox_train_.erase(it);
    } else {
        auto it = outbox_aggregate_.find(round);
        if (it == outbox_aggregate_.end()) return;
        send_model(Message::Kind::Aggregate, round, it->second, sample);
        outbox_aggregate_.erase(it);
    }
}

void ModestNode::send_model(Message::Kind kind, Round round, const std::shared_ptr<const Model>& model,
                            const std::vector<NodeId>& recipients) {
    auto snapshot = view_snapshot();
    const TransferBytes bytes{model->byte_size(cfg_.bytes_per_param),
                              view_wire_bytes(*snapshot) + cfg_.header_bytes};
    for (const NodeId& j : recipients) {
        Message msg;
        msg.kind = kind;
        msg.round = round;
        msg.model = model;
        msg.view = snapshot;
        if (kind == Message::Kind::Train)
            sim_.metrics().count_train_msg(round);
        else
            sim_.metrics().count_aggregate_msg(round);
        sim_.send(index_, env_->index_of(j), std::move(msg), bytes);
    }
}

void ModestNode::cancel_training() {
    training_active_ = false;
    training_input_.reset();
}

void ModestNode::on_timer(std::uint64_t tag) {
    const TagFields f = split_tag(tag);
    if (f.kind == kTagKindRejoin) {
        const SimTime budget = silence_budget();
        const SimTime silence = sim_.now() - last_heard_;
        if (silence > budget) {
            request_join();
            sim_.set_timer(index_, budget + 1, make_tag(kTagKindRejoin, 0, 0, 0));
        } else {
            sim_.set_timer(index_, budget - silence + 1, make_tag(kTagKindRejoin, 0, 0, 0));
        }
        return;
    }
    const auto purpose = static_cast<Purpose>(f.purpose);
    const SampleKey key{static_cast<std::uint8_t>(f.purpose), f.round};
    auto it = samples_.find(key);
    if (it == samples_.end()) return;  // sample completed or superseded
    if (f.kind == kTagKindPing) {
        if (it->second.waiting_retry) return;  // stale timer from the failed attempt
        process_step(purpose, f.round, it->second.request.on_ping_timeout(env_->id_of(f.node)));
        return;
    }
    if (f.kind == kTagKindRetry && it->second.waiting_retry) {
        const std::size_t size = it->second.request.target_size();
        begin_sample(purpose, f.round, size, it->second.first_begin);
    }
}

void ModestNode::refresh_advert_peers() {
    // each join advertises to a fresh random set; reusing one fixed set can
    // repeatedly land on stale-viewed peers whose low round estimates keep the
    // joiner outside everyone's activity window
    auto pool = view_.registry.registered();
    std::erase(pool, ident_.self);
    if (pool.size() < static_cast<std::size_t>(cfg_.s)) return;  // keep the assigned bootstrap set
    Rng rng(mix_seed({ident_.self.value, static_cast<std::uint64_t>(ident_.persistent_counter), 0xad7eULL}));
    rng.shuffle(pool);
    pool.resize(static_cast<std::size_t>(cfg_.s));
    ident_.bootstrap_peers = std::move(pool);
}

void ModestNode::request_join() {
    refresh_advert_peers();
    const EventAdvert advert = request_join_event();
    for (const NodeId& peer : advert.peers) {
        if (peer == ident_.self) continue;
        Message msg;
        msg.kind = Message::Kind::Joined;
        msg.counter = advert.counter;
        sim_.send(index_, env_->index_of(peer), std::move(msg), TransferBytes{0, cfg_.control_msg_bytes});
    }
    if (env_->on_view_changed) env_->on_view_changed(index_);
}

void ModestNode::on_recovered() {
    // a restarted process advertises itself again right away; the silence
    // heuristic only covers nodes that never went down but were suspected
    last_heard_ = sim_.now();
    request_join();
    arm_rejoin_check();
}

void ModestNode::request_leave() {
    const EventAdvert advert = modest::request_leave(ident_, view_);
    for (const NodeId& peer : advert.peers) {
        if (peer == ident_.self) continue;
        Message msg;
        msg.kind = Message::Kind::Left;
        msg.counter = advert.counter;
        sim_.send(index_, env_->index_of(peer), std::move(msg), TransferBytes{0, cfg_.control_msg_bytes});
    }
}

EventAdvert ModestNode::request_join_event() { return modest::request_join(ident_, view_); }

std::string ModestNode::diagnostic_brief() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [key, active] : samples_) {
        if (!first) os << ", ";
        first = false;
        os << "node " << index_ << " " << (key.first == 0 ? "S" : "A") << "^" << key.second << " "
           << active.request.responders().size() << "/" << active.request.target_size() << " attempt "
           << active.attempt << (active.waiting_retry ? " (stalled, backing off)" : "");
    }
    if (k_agg_ > last_agg_broadcast_ && !pending_models_.empty()) {
        if (!first) os << ", ";
        first = false;
        os << "node " << index_ << " aggregating k=" << k_agg_ << " " << pending_models_.size() << "/"
           << cfg_.aggregation_threshold() << " models";
    }
    if (!first) {
        os << ", pool=" << candidates(view_, std::max(k_agg_, k_train_) + 1, cfg_.dk).size();
    }
    return os.str();
}

}  // namespace modest
