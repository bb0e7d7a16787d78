#include "raftsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace raftsim {

using nlohmann::json;

namespace {

bool fail(config_error* err, const std::string& key, const std::string& msg) {
    if (err) *err = config_error{key, msg};
    return false;
}

template <typename T>
bool read_field(const json& j, const char* key, T& out, config_error* err) {
    if (!j.contains(key)) return true;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        return fail(err, key, "invalid value type");
    }
    return true;
}

bool parse_faults(const json& j, std::vector<fault_action>& out,
                  config_error* err) {
    if (!j.contains("faults")) return true;
    const json& arr = j.at("faults");
    if (!arr.is_array()) return fail(err, "faults", "must be an array");
    for (const json& f : arr) {
        fault_action a;
        double t_s = 0;
        if (!read_field(f, "time_s", t_s, err)) return false;
        a.t = time_us(t_s * 1e6);
        std::string action = f.value("action", "");
        if (action == "crash") {
            a.k = fault_action::kind::crash;
            a.node = f.value("node", -1);
            if (a.node < 0) return fail(err, "faults.node", "crash needs node");
        } else if (action == "recover") {
            a.k = fault_action::kind::recover;
            a.node = f.value("node", -1);
            if (a.node < 0) return fail(err, "faults.node", "recover needs node");
        } else if (action == "crash_leader") {
            a.k = fault_action::kind::crash_leader;
            a.down_us = time_us(f.value("down_s", 0.0) * 1e6);
        } else if (action == "partition") {
            a.k = fault_action::kind::partition;
            if (!f.contains("groups"))
                return fail(err, "faults.groups", "partition needs groups");
            for (const json& g : f.at("groups")) {
                std::vector<uint32_t> ids;
                for (const json& id : g) ids.push_back(id.get<uint32_t>());
                a.groups.push_back(std::move(ids));
            }
        } else if (action == "heal") {
            a.k = fault_action::kind::heal;
        } else if (action == "set_loss") {
            a.k = fault_action::kind::set_loss;
            a.from = f.value("from", -1);
            a.to = f.value("to", -1);
            a.p = f.value("p", 1.0);
            if (a.from < 0 || a.to < 0)
                return fail(err, "faults.from/to", "set_loss needs a link");
        } else {
            return fail(err, "faults.action", "unknown action '" + action + "'");
        }
        out.push_back(std::move(a));
    }
    return true;
}

}  // namespace

bool load_config_json(const std::string& text, experiment_config& out,
                      config_error* err) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        return fail(err, "<root>", e.what());
    }
    if (!j.is_object()) return fail(err, "<root>", "config must be an object");

    static const std::set<std::string> known = {
        "variants", "n_values", "rates", "seeds", "repeats", "duration_s",
        "fanout", "round_period_ms", "idle_period_ms", "election_timeout_ms",
        "gossip_relay", "baseline_immediate", "latency_ms", "loss_prob",
        "leader_out_degree", "degrade_at_s", "first_leader", "clients", "cost",
        "faults", "fuzz_faults", "fuzz_loss_max"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            return fail(err, it.key(), "unknown configuration key");

    experiment_config cfg;
    if (j.contains("variants")) {
        cfg.variants.clear();
        if (!j.at("variants").is_array())
            return fail(err, "variants", "must be an array");
        for (const json& v : j.at("variants")) {
            variant var;
            if (!v.is_string() || !parse_variant(v.get<std::string>(), var))
                return fail(err, "variants",
                            "unknown variant '" + v.dump() + "'");
            cfg.variants.push_back(var);
        }
    }
    if (!read_field(j, "n_values", cfg.n_values, err)) return false;
    if (!read_field(j, "rates", cfg.rates, err)) return false;
    if (!read_field(j, "seeds", cfg.seeds, err)) return false;
    if (!read_field(j, "repeats", cfg.repeats, err)) return false;
    if (!read_field(j, "duration_s", cfg.duration_s, err)) return false;
    if (!read_field(j, "fanout", cfg.fanout, err)) return false;
    if (!read_field(j, "round_period_ms", cfg.round_period_ms, err)) return false;
    if (!read_field(j, "idle_period_ms", cfg.idle_period_ms, err)) return false;
    if (!read_field(j, "election_timeout_ms", cfg.election_timeout_ms, err))
        return false;
    if (!read_field(j, "gossip_relay", cfg.gossip_relay, err)) return false;
    if (!read_field(j, "baseline_immediate", cfg.baseline_immediate, err))
        return false;
    if (j.contains("latency_ms")) {
        const json& l = j.at("latency_ms");
        if (!read_field(l, "min", cfg.latency.min_ms, err)) return false;
        if (!read_field(l, "mode", cfg.latency.mode_ms, err)) return false;
        if (!read_field(l, "max", cfg.latency.max_ms, err)) return false;
    }
    if (!read_field(j, "loss_prob", cfg.loss_prob, err)) return false;
    if (!read_field(j, "leader_out_degree", cfg.leader_out_degree, err))
        return false;
    if (!read_field(j, "degrade_at_s", cfg.degrade_at_s, err)) return false;
    if (!read_field(j, "first_leader", cfg.first_leader, err)) return false;
    if (j.contains("clients")) {
        const json& c = j.at("clients");
        if (!read_field(c, "m", cfg.clients.m, err)) return false;
        if (!read_field(c, "rate_rps", cfg.clients.rate_rps, err)) return false;
        if (!read_field(c, "command_size", cfg.clients.command_size, err))
            return false;
        if (!read_field(c, "retry_budget", cfg.clients.retry_budget, err))
            return false;
        double tmo = double(cfg.clients.request_timeout) / 1000.0;
        if (!read_field(c, "request_timeout_ms", tmo, err)) return false;
        cfg.clients.request_timeout = time_us(tmo * 1000.0);
    }
    if (j.contains("cost")) {
        const json& c = j.at("cost");
        if (!read_field(c, "ae_base", cfg.costs.ae_base, err)) return false;
        if (!read_field(c, "ae_per_entry", cfg.costs.ae_per_entry, err))
            return false;
        if (!read_field(c, "per_bitmap_bit", cfg.costs.per_bitmap_bit, err))
            return false;
        if (!read_field(c, "reply", cfg.costs.reply, err)) return false;
        if (!read_field(c, "vote", cfg.costs.vote, err)) return false;
        if (!read_field(c, "vote_reply", cfg.costs.vote_reply, err)) return false;
        if (!read_field(c, "client_request", cfg.costs.client_req, err))
            return false;
        if (!read_field(c, "client_response", cfg.costs.client_resp, err))
            return false;
        if (!read_field(c, "log_append", cfg.costs.log_append, err)) return false;
        if (!read_field(c, "service_us_per_unit", cfg.costs.service_us_per_unit,
                        err))
            return false;
    }
    if (!parse_faults(j, cfg.faults, err)) return false;
    if (!read_field(j, "fuzz_faults", cfg.fuzz_faults, err)) return false;
    if (!read_field(j, "fuzz_loss_max", cfg.fuzz_loss_max, err)) return false;

    if (!validate_config(cfg, err)) return false;
    out = std::move(cfg);
    return true;
}

bool load_config_file(const std::string& path, experiment_config& out,
                      config_error* err) {
    std::ifstream in(path);
    if (!in.is_open()) return fail(err, "<file>", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config_json(ss.str(), out, err);
}

bool validate_config(const experiment_config& cfg, config_error* err) {
    if (cfg.variants.empty()) return fail(err, "variants", "must not be empty");
    if (cfg.n_values.empty()) return fail(err, "n_values", "must not be empty");
    for (uint32_t n : cfg.n_values)
        if (n < 2 || n > 200) return fail(err, "n_values", "n must be in 2..200");
    if (cfg.seeds.empty()) return fail(err, "seeds", "must not be empty");
    if (cfg.repeats < 1) return fail(err, "repeats", "must be >= 1");
    if (cfg.duration_s <= 0) return fail(err, "duration_s", "must be > 0");
    if (cfg.fanout < 1) return fail(err, "fanout", "must be >= 1");
    if (cfg.loss_prob < 0 || cfg.loss_prob > 1)
        return fail(err, "loss_prob", "must be in [0,1]");
    if (cfg.latency.min_ms <= 0 || cfg.latency.mode_ms < cfg.latency.min_ms ||
        cfg.latency.max_ms < cfg.latency.mode_ms)
        return fail(err, "latency_ms", "need 0 < min <= mode <= max");
    if (cfg.clients.m < 1) return fail(err, "clients.m", "must be >= 1");
    if (cfg.costs.service_us_per_unit < 0)
        return fail(err, "cost.service_us_per_unit", "must be >= 0");
    if (cfg.fuzz_loss_max < 0 || cfg.fuzz_loss_max > 1)
        return fail(err, "fuzz_loss_max", "must be in [0,1]");
    return true;
}

sim_params make_sim_params(const experiment_config& cfg, variant v, uint32_t n,
                           uint64_t seed) {
    sim_params p;
    p.seed = seed;
    p.until = time_us(cfg.duration_s * 1e6);
    p.costs = cfg.costs;

    double t_ms = cfg.election_timeout_ms > 0 ? cfg.election_timeout_ms
                                              : 10.0 * cfg.latency.mean_ms();
    p.node.var = v;
    p.node.n = n;
    p.node.fanout = std::min(cfg.fanout, n - 1);
    p.node.election_timeout = time_us(t_ms * 1000.0);
    p.node.round_period = time_us(
        (cfg.round_period_ms > 0 ? cfg.round_period_ms : t_ms / 5.0) * 1000.0);
    p.node.idle_period = time_us(
        (cfg.idle_period_ms > 0 ? cfg.idle_period_ms : t_ms / 2.0) * 1000.0);
    p.node.gossip_relay = cfg.gossip_relay;
    p.node.baseline_immediate = cfg.baseline_immediate;

    p.topo = topology(n, cfg.loss_prob);
    p.topo.latency = cfg.latency;
    p.client_latency = cfg.latency;
    p.first_leader = cfg.first_leader;
    p.faults = cfg.faults;

    if (cfg.fuzz_faults) {
        rng r(seed);
        double loss = cfg.fuzz_loss_max * r.fork(0x77).unit();
        p.topo.set_loss_all(loss);
        auto extra = make_fuzz_faults(seed, n, p.until);
        p.faults.insert(p.faults.end(), extra.begin(), extra.end());
    }

    if (cfg.leader_out_degree > 0 && cfg.first_leader >= 0) {
        // Degrade the first leader's out-links so it reaches only the first
        // `leader_out_degree` followers directly; replies still flow back.
        node_id lead = node_id(cfg.first_leader);
        uint32_t kept = 0;
        for (node_id j = 0; j < n; ++j) {
            if (j == lead) continue;
            if (kept < cfg.leader_out_degree) {
                ++kept;
                continue;
            }
            fault_action a;
            a.k = fault_action::kind::set_loss;
            a.t = time_us(cfg.degrade_at_s * 1e6);
            a.from = int32_t(lead);
            a.to = int32_t(j);
            a.p = 1.0;
            p.faults.push_back(a);
        }
    }
    return p;
}

client_config make_client_config(const experiment_config& cfg, double rate) {
    client_config c = cfg.clients;
    c.rate_rps = rate > 0 ? rate : cfg.clients.rate_rps;
    return c;
}

std::vector<fault_action> make_fuzz_faults(uint64_t seed, uint32_t n,
                                           time_us duration) {
    std::vector<fault_action> out;
    rng r(rng(seed).fork(0xFA));
    // 1-3 leader crashes, each recovering after 0.5-1.5s.
    int crashes = int(r.between(1, 3));
    for (int i = 0; i < crashes; ++i) {
        fault_action a;
        a.k = fault_action::kind::crash_leader;
        a.t = time_us(r.between(uint64_t(duration / 5),
                                uint64_t(duration * 3 / 4)));
        a.down_us = time_us(r.between(500'000, 1'500'000));
        out.push_back(a);
    }
    // One partition splitting the cluster in two, healed after 0.8-1.6s.
    fault_action part;
    part.k = fault_action::kind::partition;
    part.t = time_us(r.between(uint64_t(duration / 4), uint64_t(duration / 2)));
    uint32_t cut = uint32_t(r.between(1, n - 1));
    std::vector<uint32_t> g1, g2;
    for (uint32_t i = 0; i < n; ++i)
        (i < cut ? g1 : g2).push_back(i);
    part.groups = {g1, g2};
    out.push_back(part);
    fault_action heal;
    heal.k = fault_action::kind::heal;
    heal.t = part.t + time_us(r.between(800'000, 1'600'000));
    out.push_back(heal);
    return out;
}

// --- presets -----------------------------------------------------------------

namespace {

experiment_config base_preset() {
    experiment_config c;
    c.first_leader = 0;
    return c;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"paper-throughput", "cpu-vs-load", "cpu-vs-replicas",
            "commit-lag-cdf", "safety-fuzz", "non-transitive", "desk-small"};
}

bool preset_config(const std::string& name, experiment_config& out,
                   std::string* description) {
    if (name == "paper-throughput") {
        experiment_config c = base_preset();
        c.n_values = {51};
        c.seeds = {11};
        c.repeats = 3;
        c.duration_s = 8.0;
        c.clients.m = 100;
        c.election_timeout_ms = 80.0;
        c.round_period_ms = 4.0;
        if (description)
            *description =
                "latency vs throughput at saturation: 51 replicas, 100 "
                "closed-loop clients, all variants";
        out = std::move(c);
        return true;
    }
    if (name == "cpu-vs-load") {
        experiment_config c = base_preset();
        c.n_values = {51};
        c.rates = {200, 400, 800, 1600};
        c.seeds = {13};
        c.repeats = 3;
        c.duration_s = 8.0;
        c.clients.m = 10;
        if (description)
            *description =
                "per-node cost vs client request rate: 51 replicas, 10 "
                "closed-loop clients with pacing";
        out = std::move(c);
        return true;
    }
    if (name == "cpu-vs-replicas") {
        experiment_config c = base_preset();
        c.n_values = {5, 11, 21, 51};
        c.seeds = {17};
        c.repeats = 3;
        c.duration_s = 8.0;
        c.clients.m = 10;
        c.round_period_ms = 10.0;
        if (description)
            *description =
                "per-node cost vs cluster size: 10 closed-loop clients, n in "
                "{5,11,21,51}";
        out = std::move(c);
        return true;
    }
    if (name == "commit-lag-cdf") {
        experiment_config c = base_preset();
        c.n_values = {51};
        c.seeds = {7};
        c.repeats = 1;
        c.duration_s = 8.0;
        c.clients.m = 10;
        c.election_timeout_ms = 80.0;
        c.round_period_ms = 2.0;
        if (description)
            *description =
                "commit-lag distribution: time from leader receipt to each "
                "replica's commit, fixed seed";
        out = std::move(c);
        return true;
    }
    if (name == "safety-fuzz") {
        experiment_config c = base_preset();
        c.first_leader = -1;
        c.n_values = {3, 5, 7, 9, 21};
        c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
                   11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
        c.repeats = 1;
        c.duration_s = 8.0;
        c.clients.m = 5;
        c.clients.command_size = 16;
        c.fuzz_faults = true;
        c.fuzz_loss_max = 0.2;
        if (description)
            *description =
                "randomized crash/partition/loss runs checked for all safety "
                "properties (100 runs per variant)";
        out = std::move(c);
        return true;
    }
    if (name == "non-transitive") {
        experiment_config c = base_preset();
        c.n_values = {21};
        c.seeds = {5};
        c.repeats = 1;
        c.duration_s = 63.0;
        c.clients.m = 5;
        c.leader_out_degree = 6;  // ceil(21/4)
        c.degrade_at_s = 3.0;
        // Rounds enter the network only through the 6 reachable followers, so
        // idle-heartbeat gaps span a few periods; keep periods short and the
        // timeout above the worst gap.
        c.election_timeout_ms = 80.0;
        c.round_period_ms = 5.0;
        c.idle_period_ms = 10.0;
        if (description)
            *description =
                "leader keeps direct links to only ceil(n/4) followers; "
                "epidemic variants must hold the leadership";
        out = std::move(c);
        return true;
    }
    if (name == "desk-small") {
        experiment_config c = base_preset();
        c.n_values = {5};
        c.seeds = {3};
        c.repeats = 1;
        c.duration_s = 5.0;
        c.clients.m = 5;
        if (description) *description = "quick 5-node smoke run, all variants";
        out = std::move(c);
        return true;
    }
    return false;
}

std::string describe_config_schema() {
    experiment_config d;
    std::ostringstream os;
    os << "Configuration file: a single JSON object. Keys and defaults:\n"
       << "  variants            [\"baseline\",\"v1\",\"v2\"]  protocol variants to run\n"
       << "  n_values            [5]        cluster sizes\n"
       << "  rates               [0]        aggregate client req/s targets; 0 = unpaced\n"
       << "  seeds               [1]        base RNG seeds (one run per seed)\n"
       << "  repeats             1          repeats per seed (run seed = seed + repeat)\n"
       << "  duration_s          5.0        simulated seconds per run\n"
       << "  fanout              " << d.fanout
       << "          gossip fanout F (clamped to n-1)\n"
       << "  round_period_ms     0          leader round period; 0 = T/5\n"
       << "  idle_period_ms      0          idle heartbeat period; 0 = T/2\n"
       << "  election_timeout_ms 0          T; 0 = 10x mean one-hop delay\n"
       << "  gossip_relay        true       followers relay fresh gossip\n"
       << "  baseline_immediate  true       baseline replicates on accept\n"
       << "  latency_ms          {min:1,mode:2,max:5}  triangular one-hop delay\n"
       << "  loss_prob           0.0        per-link message loss\n"
       << "  leader_out_degree   0          >0: degrade leader out-links to this many\n"
       << "  degrade_at_s        0.0        when the degradation applies\n"
       << "  first_leader        -1         node primed to win the first election\n"
       << "  clients             {m:10, rate_rps:0, command_size:64,\n"
       << "                       retry_budget:25, request_timeout_ms:400}\n"
       << "  cost                {ae_base:1.0, ae_per_entry:0.1, per_bitmap_bit:0.001,\n"
       << "                       reply:0.1, vote:0.3, vote_reply:0.1,\n"
       << "                       client_request:0.3, client_response:0.1,\n"
       << "                       log_append:0.1, service_us_per_unit:45.0}\n"
       << "  faults              []         [{time_s, action: crash|recover|\n"
       << "                       crash_leader|partition|heal|set_loss, ...}]\n"
       << "  fuzz_faults         false      seed-derived crashes + one partition\n"
       << "  fuzz_loss_max       0.0        seed-derived loss upper bound\n";
    return os.str();
}

}  // namespace raftsim
