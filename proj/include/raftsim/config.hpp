#pragma once
#include <optional>
#include <string>
#include <vector>

#include "raftsim/sim.hpp"
#include "raftsim/workload.hpp"

namespace raftsim {

// One experiment: a matrix of (variant x n x rate x seed x repeat) runs over
// shared protocol/network/workload settings. Values of 0 mean "derive the
// default" where noted.
struct experiment_config {
    std::vector<variant> variants{variant::baseline, variant::v1, variant::v2};
    std::vector<uint32_t> n_values{5};
    std::vector<double> rates{0.0};  // aggregate req/s; 0 = unpaced closed loop
    std::vector<uint64_t> seeds{1};
    uint32_t repeats = 1;
    double duration_s = 5.0;

    uint32_t fanout = 3;
    double round_period_ms = 0.0;      // 0: election_timeout / 5
    double idle_period_ms = 0.0;       // 0: election_timeout / 2
    double election_timeout_ms = 0.0;  // 0: 10 x mean one-hop delay
    bool gossip_relay = true;
    bool baseline_immediate = true;

    latency_spec latency{1.0, 2.0, 5.0};
    double loss_prob = 0.0;

    // Non-transitive scenario: after degrade_at_s, node `first_leader` keeps
    // direct out-links to only `leader_out_degree` followers.
    uint32_t leader_out_degree = 0;
    double degrade_at_s = 0.0;
    int32_t first_leader = -1;

    client_config clients;
    cost_model costs;
    std::vector<fault_action> faults;

    // Randomized fault schedule per run (leader crashes + one partition) and
    // seed-derived link loss in [0, fuzz_loss_max].
    bool fuzz_faults = false;
    double fuzz_loss_max = 0.0;
};

struct config_error {
    std::string key;
    std::string message;
};

// JSON file loading; unknown keys and malformed values are errors naming the
// offending key.
bool load_config_file(const std::string& path, experiment_config& out,
                      config_error* err);
bool load_config_json(const std::string& text, experiment_config& out,
                      config_error* err);
bool validate_config(const experiment_config& cfg, config_error* err);

// Built-in presets mirroring the evaluation scenarios.
std::vector<std::string> preset_names();
bool preset_config(const std::string& name, experiment_config& out,
                   std::string* description = nullptr);
std::string describe_config_schema();  // full schema with defaults

// Materializes simulator parameters for one run of the matrix.
sim_params make_sim_params(const experiment_config& cfg, variant v, uint32_t n,
                           uint64_t seed);
client_config make_client_config(const experiment_config& cfg, double rate);

// Seed-derived fault schedule for fuzz runs: 1-3 leader crashes and one
// partition, all within the run's duration.
std::vector<fault_action> make_fuzz_faults(uint64_t seed, uint32_t n,
                                           time_us duration);

}  // namespace raftsim
