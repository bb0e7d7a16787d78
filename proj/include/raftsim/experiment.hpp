#pragma once
#include <string>
#include <vector>

#include "raftsim/checker.hpp"
#include "raftsim/config.hpp"
#include "raftsim/metrics.hpp"

namespace raftsim {

struct run_options {
    std::string out_dir;       // empty: no files
    bool emit_traces = false;  // write trace.log per run (large)
    int jobs = 1;              // parallel independent runs
    bool quiet = false;
};

struct run_result {
    variant var = variant::baseline;
    uint32_t n = 0;
    double rate = 0.0;
    uint64_t seed = 0;
    uint32_t repeat = 0;
    metrics_report report;
    check_verdict verdict;
    uint64_t trace_hash = 0;
    std::string error;  // non-empty: run failed outright

    std::string dir_name() const;  // stable per-run directory name
};

// Executes one fully specified run (variant/n/rate/seed already chosen).
run_result execute_run(const experiment_config& cfg, variant v, uint32_t n,
                       double rate, uint64_t seed, uint32_t repeat,
                       const run_options& opt);

// Runs the whole matrix, writes summary.csv / summary_mean.csv under
// opt.out_dir when set, prints a comparison table, and returns all results.
std::vector<run_result> run_experiment(const experiment_config& cfg,
                                       const run_options& opt);

// 0 = all good, 3 = safety violation or run failure (config errors are the
// caller's code 2).
int experiment_exit_code(const std::vector<run_result>& results);

std::string comparison_table(const std::vector<run_result>& results);

}  // namespace raftsim
