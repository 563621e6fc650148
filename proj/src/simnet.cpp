#include "modest/simnet.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "modest/rng.hpp"

namespace modest {

// ---- LatencyModel -------------------------------------------------------

LatencyModel LatencyModel::uniform(std::size_t n, SimTime lo, SimTime hi, std::uint64_t seed) {
    if (lo <= 0 || hi < lo) throw std::invalid_argument("latency bounds must satisfy 0 < lo <= hi");
    LatencyModel m;
    m.n_ = n;
    m.sites_ = n;
    m.site_delay_.assign(n * n, 0);
    Rng rng(mix_seed({seed, 0x6c6174656e6379ULL}));  // "latency"
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j)
                m.site_delay_[i * n + j] =
                    lo + static_cast<SimTime>(rng.uniform01() * static_cast<double>(hi - lo));
    return m;
}

LatencyModel LatencyModel::constant(std::size_t n, SimTime delay) {
    if (delay <= 0) throw std::invalid_argument("latency must be positive");
    LatencyModel m;
    m.n_ = n;
    m.sites_ = n;
    m.site_delay_.assign(n * n, delay);
    for (std::size_t i = 0; i < n; ++i) m.site_delay_[i * n + i] = 0;
    return m;
}

LatencyModel LatencyModel::from_matrix(std::vector<std::vector<SimTime>> site_delays, std::size_t n) {
    LatencyModel m;
    m.n_ = n;
    m.sites_ = site_delays.size();
    if (m.sites_ == 0) throw std::invalid_argument("empty latency matrix");
    m.site_delay_.assign(m.sites_ * m.sites_, 0);
    for (std::size_t i = 0; i < m.sites_; ++i) {
        if (site_delays[i].size() != m.sites_) throw std::invalid_argument("latency matrix is not square");
        for (std::size_t j = 0; j < m.sites_; ++j) {
            if (i != j && site_delays[i][j] <= 0)
                throw std::invalid_argument("latency matrix entries must be positive");
            m.site_delay_[i * m.sites_ + j] = site_delays[i][j];
        }
    }
    return m;
}

LatencyModel LatencyModel::from_matrix_csv(const std::string& path, std::size_t n, bool halve_rtt) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open latency matrix: " + path);
    std::vector<std::vector<SimTime>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<SimTime> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const double ms = std::stod(cell);
            const double one_way_ms = halve_rtt ? ms / 2.0 : ms;
            row.push_back(ms_to_us(one_way_ms));
        }
        rows.push_back(std::move(row));
    }
    return from_matrix(std::move(rows), n);
}

SimTime LatencyModel::delay(std::size_t from, std::size_t to) const {
    if (from == to) return self_delay_;
    return site_delay_[(from % sites_) * sites_ + (to % sites_)];
}

SimTime LatencyModel::max_delay() const {
    SimTime mx = 0;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            if (i != j) mx = std::max(mx, delay(i, j));
    return mx;
}

std::size_t LatencyModel::lowest_median_node() const {
    std::size_t best = 0;
    SimTime best_median = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        std::vector<SimTime> ds;
        ds.reserve(n_ - 1);
        for (std::size_t j = 0; j < n_; ++j)
            if (i != j) ds.push_back(delay(i, j));
        std::sort(ds.begin(), ds.end());
        const SimTime med = ds.empty() ? 0 : ds[(ds.size() - 1) / 2];
        if (i == 0 || med < best_median) {
            best = i;
            best_median = med;
        }
    }
    return best;
}

// ---- Simulation ---------------------------------------------------------

Simulation::Simulation(std::size_t n, LatencyModel latency, MetricsCollector& metrics)
    : n_(n), latency_(std::move(latency)), metrics_(metrics), up_(n, 1), node_epoch_(n, 0) {}

std::size_t Simulation::up_count() const {
    std::size_t c = 0;
    for (char u : up_) c += u ? 1 : 0;
    return c;
}

void Simulation::push(SimTime at, std::function<void(Simulation&)> fn) {
    queue_.push(Event{at, next_seq_++, std::move(fn)});
}

void Simulation::crash(std::size_t node) {
    up_[node] = 0;
    ++node_epoch_[node];
    // pending timers die with the process
    auto it = timer_gen_.lower_bound({node, 0});
    while (it != timer_gen_.end() && it->first.first == node) it = timer_gen_.erase(it);
}

void Simulation::recover(std::size_t node) { up_[node] = 1; }

void Simulation::send(std::size_t from, std::size_t to, Message msg, TransferBytes bytes) {
    if (!up_[from]) return;
    const bool local = from == to;
    const SimTime at = now_ + latency_.delay(from, to);
    // both ledger sides are written at delivery time so that messages still in
    // flight when the run stops never break byte conservation
    push(at, [from, to, local, bytes, m = std::move(msg)](Simulation& sim) {
        if (!local) sim.metrics_.record_out(from, bytes);
        if (!sim.up_[to]) {
            if (!local) sim.metrics_.note_lost(bytes.total());
            return;
        }
        if (!local) {
            sim.metrics_.record_in(to, bytes);
            sim.metrics_.note_delivered(bytes.total());
        }
        if (sim.hooks_.on_message) sim.hooks_.on_message(to, from, m);
    });
}

void Simulation::set_timer(std::size_t node, SimTime delay, std::uint64_t tag) {
    assert(delay > 0);
    const std::uint64_t gen = ++timer_gen_[{node, tag}];
    push(now_ + delay, [node, tag, gen](Simulation& sim) {
        auto it = sim.timer_gen_.find({node, tag});
        if (it == sim.timer_gen_.end() || it->second != gen) return;  // cancelled or re-armed
        sim.timer_gen_.erase(it);
        if (!sim.up_[node]) return;
        if (sim.hooks_.on_timer) sim.hooks_.on_timer(node, tag);
    });
}

void Simulation::cancel_timer(std::size_t node, std::uint64_t tag) { timer_gen_.erase({node, tag}); }

void Simulation::schedule_compute(std::size_t node, SimTime duration, std::uint64_t token) {
    assert(duration >= 0);
    const std::uint64_t epoch = node_epoch_[node];
    push(now_ + duration, [node, token, epoch](Simulation& sim) {
        if (!sim.up_[node] || sim.node_epoch_[node] != epoch) return;  // crashed mid-compute
        if (sim.hooks_.on_compute) sim.hooks_.on_compute(node, token);
    });
}

void Simulation::schedule_control(SimTime delay, std::function<void(Simulation&)> fn) {
    push(now_ + delay, std::move(fn));
}

void Simulation::apply(const FaultSchedule& schedule) {
    for (const FaultAction& action : schedule) {
        if (action.node >= n_) throw std::invalid_argument("fault action references unknown node");
        push(action.time, [action](Simulation& sim) {
            switch (action.kind) {
                case FaultAction::Kind::Crash:
                    sim.crash(action.node);
                    break;
                case FaultAction::Kind::Recover:
                    sim.recover(action.node);
                    break;
                case FaultAction::Kind::Join:
                case FaultAction::Kind::Leave:
                    break;  // protocol-level, handled by the fault hook
            }
            if (sim.hooks_.on_fault) sim.hooks_.on_fault(action);
        });
    }
}

void Simulation::mark_round_progress(Round k) {
    last_progress_time_ = now_;
    max_round_ = std::max(max_round_, k);
}

void Simulation::enable_stall_detection(SimTime window, std::function<std::string()> describe) {
    assert(window > 0);
    stall_enabled_ = true;
    stall_window_ = window;
    stall_describe_ = std::move(describe);
    last_progress_time_ = now_;
}

void Simulation::request_stop(std::string reason) {
    stop_requested_ = true;
    stop_reason_ = std::move(reason);
}

RunOutcome Simulation::run(SimTime horizon) {
    auto stall_diag = [this]() {
        std::string d = "no round progress for " + std::to_string(us_to_ms(stall_window_)) +
                        " ms (last started round " + std::to_string(max_round_) + ", " +
                        std::to_string(up_count()) + "/" + std::to_string(n_) + " nodes up)";
        if (stall_describe_) {
            const std::string extra = stall_describe_();
            if (!extra.empty()) d += "; " + extra;
        }
        return d;
    };

    SimTime next_check = last_progress_time_ + stall_window_;
    for (;;) {
        if (stop_requested_) return RunOutcome{StopKind::Stopped, now_, stop_reason_};
        if (queue_.empty()) {
            if (stall_enabled_) return RunOutcome{StopKind::Stalled, now_, "event queue drained: " + stall_diag()};
            return RunOutcome{StopKind::Quiescent, now_, {}};
        }
        const SimTime t_next = queue_.top().time;
        if (stall_enabled_ && next_check < t_next) {
            if (next_check > horizon) {
                now_ = horizon;
                return RunOutcome{StopKind::Horizon, now_, {}};
            }
            if (last_progress_time_ + stall_window_ <= next_check) {
                now_ = next_check;
                return RunOutcome{StopKind::Stalled, now_, stall_diag()};
            }
            next_check = last_progress_time_ + stall_window_;
            continue;
        }
        if (t_next > horizon) {
            now_ = horizon;
            return RunOutcome{StopKind::Horizon, now_, {}};
        }
        Event ev = std::move(const_cast<Event&>(queue_.top()));
        queue_.pop();
        now_ = ev.time;
        ev.fn(*this);
    }
}

}  // namespace modest
