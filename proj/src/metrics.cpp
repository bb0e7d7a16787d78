#include "raftsim/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace raftsim {

std::vector<std::pair<double, double>> compute_cdf(std::vector<double> samples) {
    std::vector<std::pair<double, double>> out;
    if (samples.empty()) return out;
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
        out.emplace_back(samples[i], double(i + 1) / n);
    }
    return out;
}

namespace {

double percentile(std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * double(sorted.size() - 1);
    size_t lo = size_t(pos);
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<double> metrics_report::follower_lags_ms() const {
    std::vector<double> out;
    for (const auto& [node, samples] : commit_lag) {
        if (node == leader) continue;
        for (const auto& s : samples)
            out.push_back(double(s.local_commit - s.leader_receipt) / 1000.0);
    }
    return out;
}

std::vector<double> metrics_report::leader_lags_ms() const {
    std::vector<double> out;
    auto it = commit_lag.find(leader);
    if (it == commit_lag.end()) return out;
    for (const auto& s : it->second)
        out.push_back(double(s.local_commit - s.leader_receipt) / 1000.0);
    return out;
}

void metrics_collector::on_record(const trace_record& r) {
    switch (r.kind) {
        case trace_kind::client:
            if (r.s == "arr") {
                arrivals_[uint64_t(r.a)] = r.t;
                if (report_.window_start == 0 || r.t < report_.window_start)
                    report_.window_start = r.t;
            } else if (r.s == "acc") {
                accept_time_[r.c] = r.t;  // leader receipt of the entry at index c
            } else if (r.s == "rsp") {
                report_.completed += 1;
                auto it = arrivals_.find(uint64_t(r.a));
                if (it != arrivals_.end())
                    report_.latencies_ms.push_back(double(r.t - it->second) / 1000.0);
            } else if (r.s == "fail") {
                report_.failed += 1;
            }
            break;
        case trace_kind::commit: {
            index_t prev = 0;
            auto it = node_ci_.find(r.node);
            if (it != node_ci_.end()) prev = it->second;
            for (index_t k = prev + 1; k <= r.a; ++k) {
                auto at = accept_time_.find(k);
                if (at != accept_time_.end())
                    report_.commit_lag[r.node].push_back(
                        commit_lag_sample{k, at->second, r.t});
            }
            node_ci_[r.node] = r.a;
            break;
        }
        case trace_kind::elected:
            report_.leader = r.node;
            break;
        case trace_kind::cost:
            report_.per_node_cost[r.node] = r.units;
            report_.per_node_msgs[r.node] = {r.a, r.b};
            break;
        case trace_kind::end:
            report_.window_end = r.t;
            break;
        default:
            break;
    }
}

metrics_report metrics_collector::finish() {
    if (done_) return report_;
    done_ = true;
    auto& rep = report_;
    double window_s =
        double(rep.window_end - rep.window_start) / 1e6;
    if (window_s > 0) rep.throughput_rps = double(rep.completed) / window_s;

    std::vector<double> lat = rep.latencies_ms;
    std::sort(lat.begin(), lat.end());
    if (!lat.empty()) {
        double sum = 0;
        for (double v : lat) sum += v;
        rep.mean_latency_ms = sum / double(lat.size());
        rep.median_latency_ms = percentile(lat, 0.5);
        rep.p99_latency_ms = percentile(lat, 0.99);
    }

    if (rep.leader >= 0) {
        auto it = node_ci_.find(rep.leader);
        rep.committed_entries = it == node_ci_.end() ? 0 : it->second;
        auto c = rep.per_node_cost.find(rep.leader);
        rep.leader_cost_units = c == rep.per_node_cost.end() ? 0.0 : c->second;
        double follower_sum = 0;
        int followers = 0;
        for (const auto& [node, units] : rep.per_node_cost) {
            if (node == rep.leader) continue;
            follower_sum += units;
            ++followers;
        }
        if (followers > 0) rep.mean_follower_cost_units = follower_sum / followers;
        if (rep.committed_entries > 0) {
            rep.leader_cost_per_entry =
                rep.leader_cost_units / double(rep.committed_entries);
            rep.mean_follower_cost_per_entry =
                rep.mean_follower_cost_units / double(rep.committed_entries);
        }
    }

    auto flags = rep.follower_lags_ms();
    std::sort(flags.begin(), flags.end());
    rep.median_follower_lag_ms = percentile(flags, 0.5);
    return rep;
}

namespace {

void fmt_double(std::string& s, double v) {
    char buf[40];
    snprintf(buf, sizeof buf, "%.6f", v);
    s += buf;
}

bool write_file(const std::string& path, const std::string& body,
                std::string* err) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) {
        if (err) *err = "cannot write " + path;
        return false;
    }
    out << body;
    return true;
}

}  // namespace

std::string summary_csv_header() {
    return "variant,n,seed,completed,failed,window_ms,throughput_rps,"
           "mean_latency_ms,median_latency_ms,p99_latency_ms,leader,"
           "committed_entries,leader_cost_units,mean_follower_cost_units,"
           "leader_cost_per_entry,mean_follower_cost_per_entry,"
           "median_follower_lag_ms";
}

std::string summary_csv_row(const metrics_report& r) {
    std::string s;
    s += r.variant;
    s += ',';
    s += std::to_string(r.n);
    s += ',';
    s += std::to_string(r.seed);
    s += ',';
    s += std::to_string(r.completed);
    s += ',';
    s += std::to_string(r.failed);
    s += ',';
    fmt_double(s, double(r.window_end - r.window_start) / 1000.0);
    s += ',';
    fmt_double(s, r.throughput_rps);
    s += ',';
    fmt_double(s, r.mean_latency_ms);
    s += ',';
    fmt_double(s, r.median_latency_ms);
    s += ',';
    fmt_double(s, r.p99_latency_ms);
    s += ',';
    s += std::to_string(r.leader);
    s += ',';
    s += std::to_string(r.committed_entries);
    s += ',';
    fmt_double(s, r.leader_cost_units);
    s += ',';
    fmt_double(s, r.mean_follower_cost_units);
    s += ',';
    fmt_double(s, r.leader_cost_per_entry);
    s += ',';
    fmt_double(s, r.mean_follower_cost_per_entry);
    s += ',';
    fmt_double(s, r.median_follower_lag_ms);
    return s;
}

bool export_report(const metrics_report& r, const std::string& dir,
                   std::string* err) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);

    std::string body = "# raftsim-metrics v1\n";
    body += summary_csv_header();
    body += '\n';
    body += summary_csv_row(r);
    body += '\n';
    if (!write_file(dir + "/summary.csv", body, err)) return false;

    body = "# raftsim-metrics v1\nnode,cost_units,sent,received,cost_per_committed_entry\n";
    for (const auto& [node, units] : r.per_node_cost) {
        body += std::to_string(node);
        body += ',';
        fmt_double(body, units);
        body += ',';
        auto m = r.per_node_msgs.find(node);
        body += std::to_string(m == r.per_node_msgs.end() ? 0 : m->second.first);
        body += ',';
        body += std::to_string(m == r.per_node_msgs.end() ? 0 : m->second.second);
        body += ',';
        fmt_double(body, r.committed_entries > 0
                             ? units / double(r.committed_entries)
                             : 0.0);
        body += '\n';
    }
    if (!write_file(dir + "/node_costs.csv", body, err)) return false;

    body = "# raftsim-metrics v1\nlatency_ms,fraction\n";
    auto lat_cdf = compute_cdf(r.latencies_ms);
    if (lat_cdf.empty()) body += "# empty\n";
    for (const auto& [v, f] : lat_cdf) {
        fmt_double(body, v);
        body += ',';
        fmt_double(body, f);
        body += '\n';
    }
    if (!write_file(dir + "/latency_cdf.csv", body, err)) return false;

    body = "# raftsim-metrics v1\nscope,lag_ms,fraction\n";
    auto fl = compute_cdf(r.follower_lags_ms());
    auto ll = compute_cdf(r.leader_lags_ms());
    if (fl.empty() && ll.empty()) body += "# empty\n";
    for (const auto& [v, f] : fl) {
        body += "followers,";
        fmt_double(body, v);
        body += ',';
        fmt_double(body, f);
        body += '\n';
    }
    for (const auto& [v, f] : ll) {
        body += "leader,";
        fmt_double(body, v);
        body += ',';
        fmt_double(body, f);
        body += '\n';
    }
    return write_file(dir + "/commit_lag_cdf.csv", body, err);
}

}  // namespace raftsim
