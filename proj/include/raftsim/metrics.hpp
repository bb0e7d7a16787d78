#pragma once
#include <map>
#include <string>
#include <vector>

#include "raftsim/trace.hpp"
#include "raftsim/types.hpp"

namespace raftsim {

// Empirical CDF: sorted distinct values with cumulative fractions in (0,1].
// Empty input yields an empty list (callers emit an explicit marker).
std::vector<std::pair<double, double>> compute_cdf(std::vector<double> samples);

struct commit_lag_sample {
    index_t index;
    time_us leader_receipt;
    time_us local_commit;
};

struct metrics_report {
    uint32_t n = 0;
    std::string variant;
    uint64_t seed = 0;
    time_us window_start = 0;  // first client arrival
    time_us window_end = 0;

    int64_t completed = 0;
    int64_t failed = 0;
    double throughput_rps = 0.0;
    double mean_latency_ms = 0.0;
    double median_latency_ms = 0.0;
    double p99_latency_ms = 0.0;
    std::vector<double> latencies_ms;

    int64_t leader = -1;  // stable leader over the window (last elected)
    int64_t committed_entries = 0;
    std::map<int64_t, double> per_node_cost;
    std::map<int64_t, std::pair<int64_t, int64_t>> per_node_msgs;  // sent/recv
    std::map<int64_t, std::vector<commit_lag_sample>> commit_lag;

    double leader_cost_units = 0.0;
    double mean_follower_cost_units = 0.0;
    double leader_cost_per_entry = 0.0;
    double mean_follower_cost_per_entry = 0.0;
    double median_follower_lag_ms = 0.0;

    std::vector<double> follower_lags_ms() const;
    std::vector<double> leader_lags_ms() const;
};

// Builds the report from trace records (client arr/rsp, acc, commit, cost,
// elected). Feed every record, then call finish().
class metrics_collector final : public trace_sink {
public:
    explicit metrics_collector(uint32_t n) { report_.n = n; }

    void on_record(const trace_record& r) override;
    metrics_report finish();

private:
    metrics_report report_;
    std::map<uint64_t, time_us> arrivals_;
    std::map<index_t, time_us> accept_time_;
    std::map<int64_t, index_t> node_ci_;
    bool done_ = false;
};

// CSV writers. All files carry a "# raftsim-metrics v1" header line.
// export_report writes summary.csv, node_costs.csv, latency_cdf.csv and
// commit_lag_cdf.csv under dir. Fatal (returns false, err set) on unwritable
// paths.
bool export_report(const metrics_report& r, const std::string& dir,
                   std::string* err);

std::string summary_csv_header();
std::string summary_csv_row(const metrics_report& r);

}  // namespace raftsim
