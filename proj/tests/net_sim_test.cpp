#include "doctest.h"
#include "raftsim/config.hpp"
#include "raftsim/experiment.hpp"
#include "raftsim/sim.hpp"
#include "raftsim/workload.hpp"

using namespace raftsim;

namespace {

sim_params tiny_params(uint32_t n, uint64_t seed) {
    experiment_config cfg;
    cfg.n_values = {n};
    cfg.duration_s = 1.0;
    sim_params p = make_sim_params(cfg, variant::baseline, n, seed);
    // Inert nodes: probe tests want the injected traffic to be the only
    // traffic, so elections must never fire.
    p.node.election_timeout = 1'000'000'000;
    return p;
}

// A probe endpoint that fires messages on request and records deliveries.
struct probe_actor final : public sim_actor {
    std::vector<time_us> delivered_at;
    void deliver(simulation&, const envelope&, time_us now) override {
        delivered_at.push_back(now);
    }
    void timer(simulation&, uint64_t, time_us) override {}
};

}  // namespace

TEST_CASE("send with a degenerate latency distribution is exact") {
    sim_params p = tiny_params(2, 1);
    p.topo.latency = latency_spec{5.0, 5.0, 5.0};
    p.until = 1'000'000;
    trace_buffer buf;
    simulation sim(p, &buf);
    sim.actor_send(0, 1, append_entries_reply{0, false, 0, 0}, 100'000);
    REQUIRE(sim.run());
    time_us send_t = -1, recv_t = -1;
    for (const auto& r : buf.records) {
        if (r.kind == trace_kind::send && r.node == 0 && r.peer == 1) send_t = r.t;
        if (r.kind == trace_kind::recv && r.node == 1 && r.peer == 0) recv_t = r.t;
    }
    CHECK(send_t == 100'000);
    CHECK(recv_t == 105'000);
}

TEST_CASE("unreachable links drop with the unreachable outcome") {
    sim_params p = tiny_params(2, 1);
    p.topo.set_reachable(0, 1, false);
    trace_buffer buf;
    simulation sim(p, &buf);
    sim.actor_send(0, 1, append_entries_reply{0, false, 0, 0}, 0);
    REQUIRE(sim.run());
    bool found = false;
    for (const auto& r : buf.records)
        if (r.kind == trace_kind::send && r.node == 0 && r.peer == 1) {
            CHECK(r.outcome == send_outcome::unreachable);
            found = true;
        }
    CHECK(found);
    auto it = sim.link_stats().find({0, 1});
    REQUIRE(it != sim.link_stats().end());
    CHECK(it->second.unreachable >= 1);
    CHECK(it->second.delivered == 0);
}

TEST_CASE("loss probability 1.0 delivers nothing over 1000 sends") {
    sim_params p = tiny_params(2, 3);
    p.topo.set_loss_all(1.0);
    p.until = 10'000'000;
    null_sink sink;
    simulation sim(p, &sink);
    for (int i = 0; i < 1000; ++i)
        sim.actor_send(0, 1, append_entries_reply{0, false, 0, 0}, i * 100);
    REQUIRE(sim.run());
    auto it = sim.link_stats().find({0, 1});
    REQUIRE(it != sim.link_stats().end());
    CHECK(it->second.sent >= 1000);
    CHECK(it->second.delivered == 0);
    CHECK(it->second.lost >= 1000);
}

TEST_CASE("same seed produces byte-identical traces") {
    auto hash_run = [](uint64_t seed) {
        experiment_config cfg;
        preset_config("desk-small", cfg);
        cfg.variants = {variant::v1};
        cfg.duration_s = 2.0;
        run_options opt;
        opt.quiet = true;
        auto results = execute_run(cfg, variant::v1, 5, 0.0, seed, 0, opt);
        REQUIRE(results.error.empty());
        return results.trace_hash;
    };
    CHECK(hash_run(42) == hash_run(42));
    CHECK(hash_run(42) != hash_run(43));  // different randomness actually used
}

TEST_CASE("crash discards volatile state; recover restores the durable image") {
    experiment_config cfg;
    preset_config("desk-small", cfg);
    cfg.variants = {variant::v2};
    cfg.duration_s = 5.0;
    cfg.faults.push_back({});
    cfg.faults.back().k = fault_action::kind::crash;
    cfg.faults.back().t = 2'500'000;
    cfg.faults.back().node = 2;
    cfg.faults.push_back({});
    cfg.faults.back().k = fault_action::kind::recover;
    cfg.faults.back().t = 3'500'000;
    cfg.faults.back().node = 2;

    sim_params p = make_sim_params(cfg, variant::v2, 5, 11);
    trace_buffer buf;
    simulation sim(p, &buf);
    client_pool pool(make_client_config(cfg, 0), 5, sim);
    for (uint32_t c = 0; c < cfg.clients.m; ++c) sim.register_actor(5 + c, &pool);
    REQUIRE(sim.run());

    // While down, node 2 sends nothing.
    for (const auto& r : buf.records)
        if (r.kind == trace_kind::send && r.node == 2)
            CHECK((r.t <= 2'500'000 || r.t >= 3'500'000));

    // Afterwards the log survived and commitIndex was re-derived.
    CHECK(sim.node(2).log().last_index() > 0);
    CHECK(sim.node(2).commit_index() > 0);
    CHECK_FALSE(sim.crashed(2));

    SUBCASE("crash of a crashed node and recover of a live node are no-ops") {
        // exercised through the fault API on a fresh simulation
        experiment_config cfg2;
        preset_config("desk-small", cfg2);
        cfg2.duration_s = 2.0;
        for (int i = 0; i < 2; ++i) {
            cfg2.faults.push_back({});
            cfg2.faults.back().k = fault_action::kind::crash;
            cfg2.faults.back().t = 500'000 + i;  // double crash
            cfg2.faults.back().node = 1;
        }
        cfg2.faults.push_back({});
        cfg2.faults.back().k = fault_action::kind::recover;
        cfg2.faults.back().t = 600'000;
        cfg2.faults.back().node = 3;  // never crashed
        sim_params p2 = make_sim_params(cfg2, variant::baseline, 5, 1);
        null_sink sink;
        simulation sim2(p2, &sink);
        REQUIRE(sim2.run());
        CHECK(sim2.crashed(1));
        CHECK_FALSE(sim2.crashed(3));
    }
}

TEST_CASE("a crashed majority halts commit progress until recovery") {
    experiment_config cfg;
    preset_config("desk-small", cfg);
    cfg.variants = {variant::baseline};
    cfg.duration_s = 6.0;
    cfg.first_leader = 0;
    for (int node : {1, 2, 3}) {
        cfg.faults.push_back({});
        cfg.faults.back().k = fault_action::kind::crash;
        cfg.faults.back().t = 2'000'000;
        cfg.faults.back().node = node;
    }
    for (int node : {1, 2, 3}) {
        cfg.faults.push_back({});
        cfg.faults.back().k = fault_action::kind::recover;
        cfg.faults.back().t = 4'000'000;
        cfg.faults.back().node = node;
    }
    sim_params p = make_sim_params(cfg, variant::baseline, 5, 21);
    trace_buffer buf;
    simulation sim(p, &buf);
    client_pool pool(make_client_config(cfg, 0), 5, sim);
    for (uint32_t c = 0; c < cfg.clients.m; ++c) sim.register_actor(5 + c, &pool);
    REQUIRE(sim.run());

    index_t ci_at_crash = 0, ci_before_recover = 0, ci_end = 0;
    for (const auto& r : buf.records) {
        if (r.kind != trace_kind::commit) continue;
        if (r.t <= 2'000'000) ci_at_crash = std::max(ci_at_crash, index_t(r.a));
        if (r.t <= 4'000'000)
            ci_before_recover = std::max(ci_before_recover, index_t(r.a));
        ci_end = std::max(ci_end, index_t(r.a));
    }
    // Entries already accepted and in flight at the crash may still commit,
    // but progress stalls without a majority and resumes after recovery.
    CHECK(ci_before_recover <= ci_at_crash + 5);
    CHECK(ci_end > ci_before_recover);
}

TEST_CASE("crashing the leader yields a new one within 4x the election timeout") {
    experiment_config cfg;
    preset_config("desk-small", cfg);
    cfg.variants = {variant::v1};
    cfg.duration_s = 6.0;
    cfg.faults.push_back({});
    cfg.faults.back().k = fault_action::kind::crash_leader;
    cfg.faults.back().t = 2'000'000;
    sim_params p = make_sim_params(cfg, variant::v1, 5, 31);
    trace_buffer buf;
    simulation sim(p, &buf);
    client_pool pool(make_client_config(cfg, 0), 5, sim);
    for (uint32_t c = 0; c < cfg.clients.m; ++c) sim.register_actor(5 + c, &pool);
    REQUIRE(sim.run());

    time_us crash_t = -1, reelect_t = -1;
    for (const auto& r : buf.records) {
        if (r.kind == trace_kind::fault && r.s.rfind("crash node=", 0) == 0 &&
            crash_t < 0 && r.t >= 2'000'000)
            crash_t = r.t;
        if (r.kind == trace_kind::elected && crash_t >= 0 && reelect_t < 0)
            reelect_t = r.t;
    }
    REQUIRE(crash_t >= 0);
    REQUIRE(reelect_t >= 0);
    CHECK(reelect_t - crash_t <= 4 * p.node.election_timeout);
}

TEST_CASE("causality and conservation hold on a lossy run") {
    experiment_config cfg;
    preset_config("desk-small", cfg);
    cfg.variants = {variant::v1};
    cfg.loss_prob = 0.15;
    cfg.duration_s = 3.0;
    sim_params p = make_sim_params(cfg, variant::v1, 5, 77);
    trace_buffer buf;
    simulation sim(p, &buf);
    client_pool pool(make_client_config(cfg, 0), 5, sim);
    for (uint32_t c = 0; c < cfg.clients.m; ++c) sim.register_actor(5 + c, &pool);
    REQUIRE(sim.run());
    CHECK(sim.conservation_holds());

    time_us prev = 0;
    for (const auto& r : buf.records) {
        CHECK(r.t >= prev);  // the clock never decreases
        prev = r.t;
    }
    // spot-check: some loss actually happened
    int64_t lost = 0;
    for (const auto& [link, c] : sim.link_stats()) lost += c.lost;
    CHECK(lost > 0);
}

TEST_CASE("per-node cost equals message counts under unit weights") {
    experiment_config cfg;
    preset_config("desk-small", cfg);
    cfg.variants = {variant::v1};
    cfg.duration_s = 2.0;
    cfg.costs = cost_model{};
    cfg.costs.ae_base = 1.0;
    cfg.costs.ae_per_entry = 0.0;
    cfg.costs.per_bitmap_bit = 0.0;
    cfg.costs.reply = 1.0;
    cfg.costs.vote = 1.0;
    cfg.costs.vote_reply = 1.0;
    cfg.costs.client_req = 1.0;
    cfg.costs.client_resp = 1.0;
    cfg.costs.log_append = 0.0;
    sim_params p = make_sim_params(cfg, variant::v1, 5, 3);
    null_sink sink;
    simulation sim(p, &sink);
    client_pool pool(make_client_config(cfg, 0), 5, sim);
    for (uint32_t c = 0; c < cfg.clients.m; ++c) sim.register_actor(5 + c, &pool);
    REQUIRE(sim.run());
    for (uint32_t i = 0; i < 5; ++i) {
        const auto& st = sim.node_stats()[i];
        CHECK(st.cost_units ==
              doctest::Approx(double(st.sent + st.received)).epsilon(1e-9));
    }
}
