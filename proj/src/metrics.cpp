#include "modest/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace modest {

void MetricsCollector::record_out(std::size_t node, const TransferBytes& b) {
    bytes_[node].model_out += b.model;
    bytes_[node].overhead_out += b.overhead;
}

void MetricsCollector::record_in(std::size_t node, const TransferBytes& b) {
    bytes_[node].model_in += b.model;
    bytes_[node].overhead_in += b.overhead;
}

std::int64_t MetricsCollector::total_model_bytes() const {
    std::int64_t acc = 0;
    for (const auto& nb : bytes_) acc += nb.model_in + nb.model_out;
    return acc;
}

std::int64_t MetricsCollector::total_overhead_bytes() const {
    std::int64_t acc = 0;
    for (const auto& nb : bytes_) acc += nb.overhead_in + nb.overhead_out;
    return acc;
}

std::int64_t MetricsCollector::total_bytes() const { return total_model_bytes() + total_overhead_bytes(); }

double MetricsCollector::overhead_share() const {
    const auto total = total_bytes();
    if (total == 0) return 0.0;
    return static_cast<double>(total_overhead_bytes()) / static_cast<double>(total);
}

RoundTrace& MetricsCollector::trace(Round k) {
    auto [it, inserted] = rounds_.try_emplace(k);
    if (inserted) it->second.round = k;
    return it->second;
}

void MetricsCollector::round_started(Round k, SimTime t) {
    auto& tr = trace(k);
    if (tr.start < 0 || t < tr.start) tr.start = t;
}

void MetricsCollector::round_metric(Round k, SimTime t, double loss, double metric) {
    auto& tr = trace(k);
    if (tr.has_metric) return;
    tr.has_metric = true;
    tr.end = t;
    tr.loss = loss;
    tr.metric = metric;
    if (tr.start < 0) tr.start = t;
    if (target_set_ && !time_to_target_) {
        const bool hit = target_higher_ ? metric >= target_value_ : loss <= target_value_;
        if (hit) {
            time_to_target_ = t;
            rounds_to_target_ = k;
        }
    }
}

void MetricsCollector::aggregator_completed(Round k) { ++trace(k).aggregators_completed; }

void MetricsCollector::trainers_selected(Round k, std::size_t count) {
    auto& tr = trace(k);
    if (tr.trainer_count == 0) tr.trainer_count = count;
}

void MetricsCollector::sample_duration(Round k, SimTime duration) {
    trace(k).sample_durations.push_back(duration);
}

void MetricsCollector::view_inclusion(const NodeId& joiner, const NodeId& observer, SimTime t, Round k) {
    auto it = join_points_.find(joiner);
    const SimTime joined_at = it == join_points_.end() ? 0 : it->second.first;
    const Round joined_round = it == join_points_.end() ? 0 : it->second.second;
    propagation_.push_back(PropagationRecord{joiner, observer, joined_at, t, joined_round, k});
}

void MetricsCollector::set_target(double value, bool higher_is_better) {
    target_value_ = value;
    target_higher_ = higher_is_better;
    target_set_ = true;
}

std::optional<double> MetricsCollector::final_loss() const {
    for (auto it = rounds_.rbegin(); it != rounds_.rend(); ++it)
        if (it->second.has_metric) return it->second.loss;
    return std::nullopt;
}

std::optional<double> MetricsCollector::final_metric() const {
    for (auto it = rounds_.rbegin(); it != rounds_.rend(); ++it)
        if (it->second.has_metric) return it->second.metric;
    return std::nullopt;
}

Round MetricsCollector::max_metric_round() const {
    for (auto it = rounds_.rbegin(); it != rounds_.rend(); ++it)
        if (it->second.has_metric) return it->first;
    return 0;
}

MetricsCollector::Summary MetricsCollector::summary() const {
    Summary s;
    s.model_bytes = total_model_bytes();
    s.overhead_bytes = total_overhead_bytes();
    s.total_bytes = s.model_bytes + s.overhead_bytes;
    s.overhead_share = overhead_share();
    if (!bytes_.empty()) {
        std::int64_t mn = bytes_.front().total(), mx = mn, sum = 0;
        for (const auto& nb : bytes_) {
            mn = std::min(mn, nb.total());
            mx = std::max(mx, nb.total());
            sum += nb.total();
        }
        s.min_node_bytes = mn;
        s.max_node_bytes = mx;
        s.mean_node_bytes = static_cast<double>(sum) / static_cast<double>(bytes_.size());
    }
    s.time_to_target = time_to_target_;
    s.rounds_to_target = rounds_to_target_;
    s.final_loss = final_loss();
    s.final_metric = final_metric();
    s.max_round = max_metric_round();
    return s;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt_ms(SimTime us) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", us_to_ms(us));
    return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);  // binary: LF line endings everywhere
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

}  // namespace

void MetricsCollector::export_run(const std::string& out_dir, const std::string& extra_summary_json) const {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    {
        auto f = open_out(dir / "timeline.csv");
        f << "time_ms,round,loss,metric\n";
        for (const auto& [k, tr] : rounds_)
            if (tr.has_metric)
                f << fmt_ms(tr.end) << "," << k << "," << fmt_double(tr.loss) << "," << fmt_double(tr.metric)
                  << "\n";
    }
    {
        auto f = open_out(dir / "bytes.csv");
        f << "node,model_in,model_out,overhead_in,overhead_out\n";
        for (std::size_t i = 0; i < bytes_.size(); ++i)
            f << i << "," << bytes_[i].model_in << "," << bytes_[i].model_out << "," << bytes_[i].overhead_in
              << "," << bytes_[i].overhead_out << "\n";
    }
    {
        auto f = open_out(dir / "rounds.csv");
        f << "round,start_ms,end_ms,sample_ms_mean,sample_ms_max,aggregators_completed,trainers,loss,metric\n";
        for (const auto& [k, tr] : rounds_) {
            SimTime total = 0, mx = 0;
            for (SimTime d : tr.sample_durations) {
                total += d;
                mx = std::max(mx, d);
            }
            const double mean =
                tr.sample_durations.empty() ? 0.0 : us_to_ms(total) / static_cast<double>(tr.sample_durations.size());
            f << k << "," << (tr.start < 0 ? "" : fmt_ms(tr.start)) << "," << (tr.end < 0 ? "" : fmt_ms(tr.end))
              << "," << fmt_double(mean) << "," << fmt_ms(mx) << "," << tr.aggregators_completed << ","
              << tr.trainer_count << "," << (tr.has_metric ? fmt_double(tr.loss) : "") << ","
              << (tr.has_metric ? fmt_double(tr.metric) : "") << "\n";
        }
    }
    {
        auto f = open_out(dir / "propagation.csv");
        f << "joiner,observer,join_time_ms,seen_time_ms,join_round,seen_round\n";
        auto sorted = propagation_;
        std::sort(sorted.begin(), sorted.end(), [](const PropagationRecord& a, const PropagationRecord& b) {
            if (a.seen_time != b.seen_time) return a.seen_time < b.seen_time;
            if (a.joiner != b.joiner) return a.joiner < b.joiner;
            return a.observer < b.observer;
        });
        for (const auto& r : sorted)
            f << r.joiner.value << "," << r.observer.value << "," << fmt_ms(r.join_time) << ","
              << fmt_ms(r.seen_time) << "," << r.join_round << "," << r.seen_round << "\n";
    }
    {
        const Summary s = summary();
        auto f = open_out(dir / "summary.json");
        f << "{\n";
        f << "  \"total_bytes\": " << s.total_bytes << ",\n";
        f << "  \"model_bytes\": " << s.model_bytes << ",\n";
        f << "  \"overhead_bytes\": " << s.overhead_bytes << ",\n";
        f << "  \"min_node_bytes\": " << s.min_node_bytes << ",\n";
        f << "  \"max_node_bytes\": " << s.max_node_bytes << ",\n";
        f << "  \"mean_node_bytes\": " << fmt_double(s.mean_node_bytes) << ",\n";
        f << "  \"overhead_share\": " << fmt_double(s.overhead_share) << ",\n";
        f << "  \"time_to_target_ms\": " << (s.time_to_target ? fmt_ms(*s.time_to_target) : "null") << ",\n";
        f << "  \"rounds_to_target\": "
          << (s.rounds_to_target ? std::to_string(*s.rounds_to_target) : "null") << ",\n";
        f << "  \"final_loss\": " << (s.final_loss ? fmt_double(*s.final_loss) : "null") << ",\n";
        f << "  \"final_metric\": " << (s.final_metric ? fmt_double(*s.final_metric) : "null") << ",\n";
        f << "  \"max_round\": " << s.max_round;
        if (!extra_summary_json.empty()) f << ",\n" << extra_summary_json;
        f << "\n}\n";
    }
}

}  // namespace modest
