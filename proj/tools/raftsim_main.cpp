#include <cstdio>

#include "CLI11.hpp"
#include "raftsim/experiment.hpp"

using namespace raftsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSafety = 3;

int cmd_run(const std::string& preset, const std::string& config_path,
            const std::string& out_dir, int64_t seed_override,
            const std::vector<std::string>& variant_filter, int jobs,
            bool emit_traces, double duration_override) {
    experiment_config cfg;
    if (!preset.empty()) {
        if (!preset_config(preset, cfg)) {
            fprintf(stderr, "config error: unknown preset '%s'\n",
                    preset.c_str());
            return kExitConfig;
        }
    } else if (!config_path.empty()) {
        config_error err;
        if (!load_config_file(config_path, cfg, &err)) {
            fprintf(stderr, "config error: key '%s': %s\n", err.key.c_str(),
                    err.message.c_str());
            return kExitConfig;
        }
    } else {
        fprintf(stderr, "config error: need --preset or --config\n");
        return kExitConfig;
    }

    if (seed_override >= 0) cfg.seeds = {uint64_t(seed_override)};
    if (duration_override > 0) cfg.duration_s = duration_override;
    if (!variant_filter.empty()) {
        std::vector<variant> vs;
        for (const auto& name : variant_filter) {
            variant v;
            if (!parse_variant(name, v)) {
                fprintf(stderr, "config error: key 'variants': unknown variant '%s'\n",
                        name.c_str());
                return kExitConfig;
            }
            vs.push_back(v);
        }
        cfg.variants = vs;
    }
    config_error err;
    if (!validate_config(cfg, &err)) {
        fprintf(stderr, "config error: key '%s': %s\n", err.key.c_str(),
                err.message.c_str());
        return kExitConfig;
    }

    run_options opt;
    opt.out_dir = out_dir;
    opt.jobs = jobs;
    opt.emit_traces = emit_traces;
    auto results = run_experiment(cfg, opt);
    for (const auto& r : results) {
        if (!r.error.empty())
            fprintf(stderr, "run %s failed: %s\n", r.dir_name().c_str(),
                    r.error.c_str());
        if (!r.verdict.pass())
            fprintf(stderr, "run %s safety:\n%s", r.dir_name().c_str(),
                    r.verdict.to_string().c_str());
    }
    return experiment_exit_code(results);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "raftsim: Raft log replication with epidemic dissemination and "
        "decentralized commit, in a deterministic network simulator"};
    app.require_subcommand(1);

    std::string preset, config_path, out_dir, trace_path;
    int64_t seed_override = -1;
    std::vector<std::string> variant_filter;
    int jobs = 2;
    bool emit_traces = false;
    double duration_override = 0;

    auto* run = app.add_subcommand("run", "run an experiment matrix");
    run->add_option("--preset", preset, "built-in preset name");
    run->add_option("--config", config_path, "JSON configuration file");
    run->add_option("--out", out_dir, "output directory for metrics files");
    run->add_option("--seed", seed_override, "override the seed list");
    run->add_option("--variant", variant_filter,
                    "restrict variants (baseline|v1|v2), repeatable");
    run->add_option("--jobs", jobs, "parallel independent runs");
    run->add_flag("--trace", emit_traces, "write trace.log per run");
    run->add_option("--duration", duration_override,
                    "override simulated seconds");

    auto* presets = app.add_subcommand("presets", "list built-in presets");
    auto* describe =
        app.add_subcommand("describe-config", "print the config schema");
    auto* check = app.add_subcommand("check", "verify a trace file");
    check->add_option("--trace-file", trace_path, "trace to verify")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (presets->parsed()) {
        for (const auto& name : preset_names()) {
            experiment_config cfg;
            std::string desc;
            preset_config(name, cfg, &desc);
            printf("%-18s %s\n", name.c_str(), desc.c_str());
        }
        return 0;
    }
    if (describe->parsed()) {
        printf("%s", describe_config_schema().c_str());
        return 0;
    }
    if (check->parsed()) {
        std::string err;
        check_verdict v = check_trace_file(trace_path, &err);
        if (!err.empty()) {
            fprintf(stderr, "%s\n", err.c_str());
            return kExitConfig;
        }
        printf("%s", v.to_string().c_str());
        return v.pass() ? 0 : kExitSafety;
    }
    return cmd_run(preset, config_path, out_dir, seed_override, variant_filter,
                   jobs, emit_traces, duration_override);
}
