#include <memory>
#include <set>

#include "doctest.h"
#include "raftsim/gossip.hpp"
#include "raftsim/raft.hpp"

using namespace raftsim;

TEST_CASE("new_walker basics") {
    SUBCASE("n=2 leaves exactly the one peer") {
        rng r(1);
        auto w = gossip::new_walker(2, 0, 1, r);
        REQUIRE(w.order.size() == 1);
        CHECK(w.order[0] == 1);
    }
    SUBCASE("same seed gives the same permutation") {
        rng r1(42), r2(42);
        auto w1 = gossip::new_walker(9, 3, 3, r1);
        auto w2 = gossip::new_walker(9, 3, 3, r2);
        CHECK(w1.order == w2.order);
    }
    SUBCASE("permutation covers all peers exactly once") {
        rng r(7);
        auto w = gossip::new_walker(12, 5, 3, r);
        std::set<node_id> seen(w.order.begin(), w.order.end());
        CHECK(seen.size() == 11);
        CHECK(seen.count(5) == 0);
    }
}

TEST_CASE("first permutation element is uniform over peers") {
    // chi-squared against uniform over the 4 peers of node 0 in n=5,
    // 10000 draws, 3 degrees of freedom, p=0.001 threshold 16.27.
    int counts[5] = {0, 0, 0, 0, 0};
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        rng r(seed * 2654435761ULL + 17);
        auto w = gossip::new_walker(5, 0, 2, r);
        counts[w.order[0]] += 1;
    }
    CHECK(counts[0] == 0);
    double chi2 = 0;
    for (int p = 1; p <= 4; ++p) {
        double diff = double(counts[p]) - 2500.0;
        chi2 += diff * diff / 2500.0;
    }
    CHECK(chi2 < 16.27);
}

TEST_CASE("round walks the permutation circularly") {
    gossip::permutation_walker w;
    w.order = {2, 3, 1};
    w.fanout = 2;

    auto first = gossip::round_targets(w);
    CHECK(first == std::vector<node_id>{2, 3});
    CHECK(w.cursor == 2);

    auto second = gossip::round_targets(w);
    CHECK(second == std::vector<node_id>{1, 2});
    CHECK(w.cursor == 4);
}

TEST_CASE("full fanout degenerates to broadcast") {
    gossip::permutation_walker w;
    w.order = {4, 1, 3, 2};
    w.fanout = 4;
    auto targets = gossip::round_targets(w);
    std::set<node_id> s(targets.begin(), targets.end());
    CHECK(s == std::set<node_id>{1, 2, 3, 4});
}

TEST_CASE("every window of ceil(|u|/F) rounds targets all peers") {
    rng r(11);
    auto w = gossip::new_walker(11, 0, 3, r);
    const uint32_t window = (uint32_t(w.order.size()) + 2) / 3;  // ceil(10/3)
    std::vector<std::vector<node_id>> rounds;
    for (uint32_t i = 0; i < 40; ++i) rounds.push_back(gossip::round_targets(w));
    for (uint32_t start = 0; start + window <= rounds.size(); ++start) {
        std::set<node_id> covered;
        for (uint32_t i = start; i < start + window; ++i)
            covered.insert(rounds[i].begin(), rounds[i].end());
        REQUIRE(covered.size() == w.order.size());
    }
}

// --- behavior through the node: rounds, freshness, relays --------------------

namespace {

struct driven_node {
    node_config cfg;
    trace_buffer trace;
    std::unique_ptr<raft_node> node;

    explicit driven_node(variant v, uint32_t n, uint32_t fanout = 2,
                         node_id self_id = 0) {
        cfg.var = v;
        cfg.n = n;
        cfg.fanout = fanout;
        cfg.election_timeout = 30'000;
        cfg.round_period = 5'000;
        cfg.idle_period = 10'000;
        node = std::make_unique<raft_node>(self_id, cfg, 99, &trace);
        node->start(0);
    }
};

// Elect node 0 leader by timing out and feeding granted votes.
void make_leader(driven_node& d, time_us now) {
    d.node->on_timer(now);  // becomes candidate, broadcasts RequestVote
    REQUIRE(d.node->current_role() == role::candidate);
    term_t t = d.node->current_term();
    auto msgs = d.node->take_outbox();
    int granted = 0;
    for (const auto& m : msgs) {
        if (!std::holds_alternative<request_vote_msg>(m.msg)) continue;
        if (++granted > int(d.cfg.n) / 2) break;
        envelope env{m.to, 0, request_vote_reply{t, true}};
        d.node->handle(env, now + 1000);
    }
    REQUIRE(d.node->current_role() == role::leader);
}

}  // namespace

TEST_CASE("leader_start_round batches the uncommitted suffix") {
    driven_node d(variant::v1, 4);
    make_leader(d, 60'000);
    d.node->take_outbox();  // drop the initial heartbeat round

    for (int i = 0; i < 3; ++i) {
        envelope env{4 + node_id(i), 0, client_request{uint64_t(i + 1), 0, "op"}};
        d.node->handle(env, 70'000);
    }
    CHECK(d.node->take_outbox().empty());  // V1 batches until the round

    uint64_t lc_before = d.node->round_lc();
    d.node->on_timer(100'000);
    auto out = d.node->take_outbox();
    REQUIRE(out.size() == 2);  // fanout sends only
    for (const auto& o : out) {
        const auto& ae = std::get<append_entries_msg>(o.msg);
        CHECK(ae.is_gossip);
        CHECK(ae.entries.size() == 3);  // commitIndex+1 .. last
        CHECK(ae.prev_log_index == 0);
        CHECK(ae.round_lc == lc_before + 1);
    }

    SUBCASE("consecutive rounds carry strictly increasing roundLC") {
        d.node->on_timer(200'000);
        auto out2 = d.node->take_outbox();
        REQUIRE(!out2.empty());
        const auto& ae = std::get<append_entries_msg>(out2[0].msg);
        CHECK(ae.round_lc == lc_before + 2);
    }
}

TEST_CASE("fully replicated log turns rounds into empty heartbeats") {
    driven_node d(variant::v1, 3);
    make_leader(d, 60'000);
    d.node->take_outbox();
    envelope env{3, 0, client_request{1, 0, "op"}};
    d.node->handle(env, 61'000);
    d.node->on_timer(d.node->next_wakeup());
    auto out = d.node->take_outbox();
    REQUIRE(!out.empty());
    // follower 1 confirms; majority of 3 commits index 1
    envelope rep{1, 0, append_entries_reply{d.node->current_term(), true, 1, 1}};
    d.node->handle(rep, d.node->next_wakeup() - 100);
    CHECK(d.node->commit_index() == 1);
    d.node->take_outbox();

    d.node->on_timer(d.node->next_wakeup());
    auto hb = d.node->take_outbox();
    REQUIRE(!hb.empty());
    const auto& ae = std::get<append_entries_msg>(hb[0].msg);
    CHECK(ae.entries.empty());
    CHECK(ae.prev_log_index == 1);
}

TEST_CASE("gossip receive: fresh delivers, replies, relays; stale is dropped") {
    driven_node d(variant::v1, 5, 2, 3);  // follower, id 3

    append_entries_msg m;
    m.term = 1;
    m.leader_id = 0;
    m.prev_log_index = 0;
    m.prev_log_term = 0;
    m.entries = {log_entry{1, "a"}};
    m.leader_commit = 0;
    m.is_gossip = true;
    m.round_lc = 4;

    d.node->handle(envelope{0, 3, m}, 1000);
    auto out = d.node->take_outbox();
    REQUIRE(out.size() == 3);  // 1 reply to the leader + 2 relays
    int replies = 0, relays = 0;
    for (const auto& o : out) {
        if (std::holds_alternative<append_entries_reply>(o.msg)) {
            ++replies;
            CHECK(o.to == 0);
            CHECK(std::get<append_entries_reply>(o.msg).success);
        } else {
            ++relays;
            const auto& relay = std::get<append_entries_msg>(o.msg);
            CHECK(relay.round_lc == 4);  // unmodified
            CHECK(relay.entries.size() == 1);
        }
    }
    CHECK(replies == 1);
    CHECK(relays == 2);
    CHECK(d.node->gossip_round_seen() == 4);

    SUBCASE("newer round is fresh again") {
        m.round_lc = 5;
        d.node->handle(envelope{2, 3, m}, 2000);  // arriving via a relay
        CHECK(d.node->take_outbox().size() == 3);
        CHECK(d.node->gossip_round_seen() == 5);
    }
    SUBCASE("duplicate round is dropped silently") {
        m.round_lc = 4;
        d.node->handle(envelope{2, 3, m}, 2000);
        CHECK(d.node->take_outbox().empty());
    }
    SUBCASE("newer term resets the round clock before adopting the round") {
        m.term = 2;
        m.round_lc = 1;  // lower than seen, but in a new term
        d.node->handle(envelope{0, 3, m}, 2000);
        CHECK(d.node->current_term() == 2);
        CHECK(d.node->gossip_round_seen() == 1);
        CHECK(d.node->take_outbox().size() == 3);
    }
    SUBCASE("relay can be disabled for ablation") {
        driven_node ablated(variant::v1, 5, 2, 3);
        ablated.cfg.gossip_relay = false;
        ablated.node = std::make_unique<raft_node>(3, ablated.cfg, 99,
                                                   &ablated.trace);
        ablated.node->start(0);
        ablated.node->handle(envelope{0, 3, m}, 1000);
        auto only = ablated.node->take_outbox();
        REQUIRE(only.size() == 1);  // reply, no relays
        CHECK(std::holds_alternative<append_entries_reply>(only[0].msg));
    }
}

TEST_CASE("fresh gossip resets the election deadline") {
    driven_node d(variant::v1, 3, 1, 1);
    time_us original_wakeup = d.node->next_wakeup();

    append_entries_msg m;
    m.term = 1;
    m.leader_id = 0;
    m.is_gossip = true;
    m.round_lc = 1;
    d.node->handle(envelope{0, 1, m}, 25'000);
    CHECK(d.node->next_wakeup() >= 25'000 + 30'000);
    CHECK(d.node->next_wakeup() != original_wakeup);

    // stale gossip must not push the deadline
    time_us after_fresh = d.node->next_wakeup();
    d.node->handle(envelope{0, 1, m}, 26'000);
    CHECK(d.node->next_wakeup() == after_fresh);
}
