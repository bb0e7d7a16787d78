#include "raftsim/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace raftsim {

std::string run_result::dir_name() const {
    char buf[96];
    if (rate > 0)
        snprintf(buf, sizeof buf, "%s_n%u_r%g/seed%llu.%u", variant_name(var), n,
                 rate, (unsigned long long)seed, repeat);
    else
        snprintf(buf, sizeof buf, "%s_n%u/seed%llu.%u", variant_name(var), n,
                 (unsigned long long)seed, repeat);
    return buf;
}

run_result execute_run(const experiment_config& cfg, variant v, uint32_t n,
                       double rate, uint64_t seed, uint32_t repeat,
                       const run_options& opt) {
    run_result res;
    res.var = v;
    res.n = n;
    res.rate = rate;
    res.seed = seed;
    res.repeat = repeat;

    uint64_t run_seed = seed + repeat;
    sim_params params = make_sim_params(cfg, v, n, run_seed);

    fanout_sink fan;
    safety_checker checker(n);
    metrics_collector metrics(n);
    trace_hasher hasher;
    fan.add(&checker);
    fan.add(&metrics);
    fan.add(&hasher);

    std::unique_ptr<trace_file_writer> file_writer;
    std::string run_dir;
    if (!opt.out_dir.empty()) {
        run_dir = opt.out_dir + "/" + res.dir_name();
        std::error_code ec;
        std::filesystem::create_directories(run_dir, ec);
        if (opt.emit_traces) {
            file_writer = std::make_unique<trace_file_writer>(
                run_dir + "/trace.log", n, v, run_seed);
            if (!file_writer->ok()) {
                res.error = "cannot write trace under " + run_dir;
                return res;
            }
            fan.add(file_writer.get());
        }
    }

    simulation sim(params, &fan);
    client_config ccfg = make_client_config(cfg, rate);
    client_pool pool(ccfg, n, sim);
    for (uint32_t c = 0; c < ccfg.m; ++c) sim.register_actor(n + c, &pool);

    std::string sim_err;
    if (!sim.run(&sim_err)) {
        res.error = sim_err;
        return res;
    }
    if (file_writer) file_writer->close();

    res.report = metrics.finish();
    res.report.n = n;
    res.report.variant = variant_name(v);
    res.report.seed = run_seed;
    res.verdict = checker.finish();
    res.trace_hash = hasher.digest();

    if (!run_dir.empty()) {
        std::string err;
        if (!export_report(res.report, run_dir, &err)) res.error = err;
        std::ofstream vf(run_dir + "/verdict.txt", std::ios::trunc);
        vf << res.verdict.to_string();
    }
    return res;
}

std::vector<run_result> run_experiment(const experiment_config& cfg,
                                       const run_options& opt) {
    struct run_spec {
        variant v;
        uint32_t n;
        double rate;
        uint64_t seed;
        uint32_t rep;
    };
    std::vector<run_spec> specs;
    for (variant v : cfg.variants)
        for (uint32_t n : cfg.n_values)
            for (double rate : cfg.rates)
                for (uint64_t seed : cfg.seeds)
                    for (uint32_t rep = 0; rep < cfg.repeats; ++rep)
                        specs.push_back(run_spec{v, n, rate, seed, rep});

    std::vector<run_result> results(specs.size());
    std::atomic<size_t> next{0};
    int jobs = std::max(1, opt.jobs);
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            const run_spec& s = specs[i];
            results[i] = execute_run(cfg, s.v, s.n, s.rate, s.seed, s.rep, opt);
        }
    };
    if (jobs == 1 || specs.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    if (!opt.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(opt.out_dir, ec);
        std::ofstream sum(opt.out_dir + "/summary.csv", std::ios::trunc);
        sum << "# raftsim-metrics v1\n";
        sum << summary_csv_header() << ",repeat,safety,trace_fnv\n";
        for (const auto& r : results) {
            sum << summary_csv_row(r.report) << ',' << r.repeat << ','
                << (r.verdict.pass() && r.error.empty() ? "pass" : "FAIL") << ','
                << std::hex << r.trace_hash << std::dec << '\n';
        }

        // Mean over seeds and repeats per (variant, n, rate) group.
        struct agg {
            int64_t runs = 0;
            double tput = 0, lat = 0, lead_cpe = 0, fol_cpe = 0, lag = 0;
            int64_t completed = 0, failed = 0;
        };
        std::map<std::tuple<std::string, uint32_t, double>, agg> groups;
        for (const auto& r : results) {
            auto& g = groups[{variant_name(r.var), r.n, r.rate}];
            g.runs += 1;
            g.tput += r.report.throughput_rps;
            g.lat += r.report.mean_latency_ms;
            g.lead_cpe += r.report.leader_cost_per_entry;
            g.fol_cpe += r.report.mean_follower_cost_per_entry;
            g.lag += r.report.median_follower_lag_ms;
            g.completed += r.report.completed;
            g.failed += r.report.failed;
        }
        std::ofstream mean(opt.out_dir + "/summary_mean.csv", std::ios::trunc);
        mean << "# raftsim-metrics v1\n";
        mean << "variant,n,rate,runs,mean_throughput_rps,mean_latency_ms,"
                "mean_leader_cost_per_entry,mean_follower_cost_per_entry,"
                "mean_median_follower_lag_ms,completed,failed\n";
        char buf[256];
        for (const auto& [key, g] : groups) {
            snprintf(buf, sizeof buf, "%s,%u,%g,%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%lld,%lld\n",
                     std::get<0>(key).c_str(), std::get<1>(key),
                     std::get<2>(key), (long long)g.runs, g.tput / g.runs,
                     g.lat / g.runs, g.lead_cpe / g.runs, g.fol_cpe / g.runs,
                     g.lag / g.runs, (long long)g.completed,
                     (long long)g.failed);
            mean << buf;
        }
    }

    if (!opt.quiet) {
        printf("%s", comparison_table(results).c_str());
        fflush(stdout);
    }
    return results;
}

int experiment_exit_code(const std::vector<run_result>& results) {
    for (const auto& r : results)
        if (!r.error.empty() || !r.verdict.pass()) return 3;
    return 0;
}

std::string comparison_table(const std::vector<run_result>& results) {
    std::map<std::tuple<std::string, uint32_t, double>,
             std::tuple<int, double, double, double, int>> groups;
    for (const auto& r : results) {
        auto& [runs, tput, lat, lag, bad] =
            groups[{variant_name(r.var), r.n, r.rate}];
        runs += 1;
        tput += r.report.throughput_rps;
        lat += r.report.mean_latency_ms;
        lag += r.report.median_follower_lag_ms;
        if (!r.verdict.pass() || !r.error.empty()) bad += 1;
    }
    std::string out;
    char buf[192];
    snprintf(buf, sizeof buf, "%-10s %5s %8s %12s %12s %14s %7s\n", "variant",
             "n", "rate", "tput(req/s)", "latency(ms)", "fol-lag(ms)", "safety");
    out += buf;
    for (const auto& [key, val] : groups) {
        const auto& [runs, tput, lat, lag, bad] = val;
        snprintf(buf, sizeof buf, "%-10s %5u %8g %12.1f %12.2f %14.2f %7s\n",
                 std::get<0>(key).c_str(), std::get<1>(key), std::get<2>(key),
                 tput / runs, lat / runs, lag / runs,
                 bad ? "FAIL" : "pass");
        out += buf;
    }
    return out;
}

}  // namespace raftsim
