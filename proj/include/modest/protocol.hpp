#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "modest/membership.hpp"
#include "modest/model.hpp"
#include "modest/sampling.hpp"
#include "modest/simnet.hpp"
#include "modest/types.hpp"

namespace modest {

struct ProtocolConfig {
    int s = 8;            // trainers per sample
    int a = 2;            // aggregators per sample
    double sf = 1.0;      // fraction of the sample required to aggregate, (0.5, 1]
    SimTime dt = 0;       // ping timeout
    Round dk = 2;         // activity window in rounds
    int bytes_per_param = 4;
    std::int64_t control_msg_bytes = 64;  // ping/pong/joined/left
    std::int64_t header_bytes = 32;       // train/aggregate framing

    // Coordinator emulation: aggregation pinned to one node, trainers push to
    // it without sampling.
    bool fixed_aggregator = false;
    std::size_t fixed_aggregator_node = 0;

    // ceil(sf * s), guarded against representation noise in sf * s
    int aggregation_threshold() const;
};

// One participant: membership view, sampler, and the push-driven
// train/aggregate state machine. Driven entirely by simulator events.
class ModestNode {
  public:
    // Runner-provided bindings shared by all nodes.
    struct Env {
        std::function<std::size_t(const NodeId&)> index_of;
        std::function<NodeId(std::size_t)> id_of;
        std::function<Model(std::size_t node, Round k, const Model& in)> train;
        std::function<SimTime(std::size_t node, Round k)> train_duration;
        // First aggregator to assemble round k's model reports it here.
        std::function<void(Round k, const Model& aggregated, SimTime now)> on_aggregate_ready;
        // Observation hooks; either may be empty.
        std::function<void(std::size_t node, Round k, const std::vector<NodeId>& candidates)> on_sample_begin;
        std::function<void(std::size_t node)> on_view_changed;
    };

    ModestNode(std::size_t index, NodeId id, ProtocolConfig cfg, Simulation& sim, Env* env);

    // Session bootstrap: the initial membership knows itself (counter 1,
    // activity 0) before the first round.
    void init_full_view(const std::vector<NodeId>& members, std::vector<NodeId> bootstrap_peers);

    // Late joiner: empty view, just the peers to advertise to.
    void identity_bootstrap(std::vector<NodeId> bootstrap_peers);

    // Arms the silence watchdog once the node is actually part of the session.
    void on_joined_session();

    // Start of round 1: self-deliver train(1) iff this node ranks into S^1.
    void bootstrap_first_sample(std::shared_ptr<const Model> init_model);

    void on_message(std::size_t from, const Message& msg);
    void on_timer(std::uint64_t tag);
    void on_compute_done(std::uint64_t token);

    // Dynamic membership (fault schedule or the auto-rejoin heuristic).
    void request_join();
    void request_leave();

    // Crash recovery: the process is back up; timers died with the crash, so
    // re-arm the rejoin check (the node is likely aged out of candidacy).
    void on_recovered();

    const View& view() const { return view_; }
    const LocalIdentity& identity() const { return ident_; }
    Round k_train() const { return k_train_; }
    Round k_agg() const { return k_agg_; }
    bool training_active() const { return training_active_; }

    // in-flight samples and starved aggregations, for the stall diagnostic
    std::string diagnostic_brief() const;

  private:
    enum class Purpose : std::uint8_t { Trainers = 0, Aggregators = 1 };

    struct ActiveSample {
        SampleRequest request;
        SimTime first_begin = 0;  // persists across retries
        int attempt = 1;
        bool waiting_retry = false;
    };
    using SampleKey = std::pair<std::uint8_t, Round>;  // (purpose, round)

    void handle_train(std::size_t from, const Message& msg);
    void handle_aggregate(std::size_t from, const Message& msg);
    void merge_incoming_view(const Message& msg, Round k);
    void record_rate_observation(Round k);
    void record_activation(Round k);
    void maybe_trigger_aggregation();
    void begin_sample(Purpose purpose, Round round, std::size_t size, std::optional<SimTime> first_begin);
    void process_step(Purpose purpose, Round round, const SampleRequest::Step& step);
    void deliver_completed_sample(Purpose purpose, Round round, const std::vector<NodeId>& sample);
    void send_model(Message::Kind kind, Round round, const std::shared_ptr<const Model>& model,
                    const std::vector<NodeId>& recipients);
    void cancel_training();
    SimTime silence_budget() const;
    void arm_rejoin_check();
    void refresh_advert_peers();
    EventAdvert request_join_event();
    std::shared_ptr<const View> view_snapshot() const;

    std::size_t index_;
    ProtocolConfig cfg_;
    Simulation& sim_;
    Env* env_;

    View view_;
    LocalIdentity ident_;

    // aggregation task
    Round k_agg_ = 0;
    std::map<NodeId, std::shared_ptr<const Model>> pending_models_;
    Round last_agg_broadcast_ = 0;

    // training task
    Round k_train_ = 0;
    bool training_active_ = false;
    Round training_round_ = 0;
    Round last_training_started_ = 0;
    std::shared_ptr<const Model> training_input_;

    // models awaiting a sample to complete
    std::map<Round, std::shared_ptr<const Model>> outbox_train_;      // aggregated, -> S^k
    std::map<Round, std::shared_ptr<const Model>> outbox_aggregate_;  // trained, -> A^(k+1)

    std::map<SampleKey, ActiveSample> samples_;

    // auto-rejoin bookkeeping: round-rate observations come from sample
    // activations and from pings (their round tags date the network's
    // progress); the silence clock counts any received message
    std::vector<Activation> rate_obs_;
    Round last_rate_round_ = 0;
    Round last_activation_round_ = 0;
    SimTime last_heard_ = 0;
};

}  // namespace modest
