#include <memory>
#include "doctest.h"
#include "raftsim/raft.hpp"

using namespace raftsim;

namespace {

struct harness {
    node_config cfg;
    trace_buffer trace;
    std::unique_ptr<raft_node> node;
    std::vector<std::pair<index_t, std::string>> applied;

    explicit harness(variant v, uint32_t n, node_id self = 0,
                     bool failing_applier = false) {
        cfg.var = v;
        cfg.n = n;
        cfg.fanout = 2;
        cfg.election_timeout = 30'000;
        cfg.round_period = 5'000;
        cfg.idle_period = 10'000;
        applier_fn ap = [this, failing_applier](index_t i, const log_entry& e) {
            if (failing_applier) return false;
            applied.emplace_back(i, e.command);
            return true;
        };
        node = std::make_unique<raft_node>(self, cfg, 7, &trace, ap);
        node->start(0);
    }

    // Time out into candidacy and grant votes until leadership.
    void elect(time_us now) {
        node->on_timer(now);
        REQUIRE(node->current_role() == role::candidate);
        term_t t = node->current_term();
        auto out = node->take_outbox();
        for (const auto& m : out) {
            if (!std::holds_alternative<request_vote_msg>(m.msg)) continue;
            if (node->current_role() == role::leader) break;
            node->handle(envelope{m.to, node->id(), request_vote_reply{t, true}},
                         now + 500);
        }
        REQUIRE(node->current_role() == role::leader);
        node->take_outbox();
    }

    // Feeds an AppendEntries as a point-to-point RPC and returns the reply.
    append_entries_reply feed_ae(const append_entries_msg& m, node_id from,
                                 time_us now) {
        node->handle(envelope{from, node->id(), m}, now);
        auto out = node->take_outbox();
        for (const auto& o : out)
            if (std::holds_alternative<append_entries_reply>(o.msg))
                return std::get<append_entries_reply>(o.msg);
        REQUIRE(false);
        return {};
    }
};

append_entries_msg make_ae(term_t term, node_id leader, index_t prev_idx,
                           term_t prev_term, std::vector<log_entry> entries,
                           index_t lc) {
    append_entries_msg m;
    m.term = term;
    m.leader_id = leader;
    m.prev_log_index = prev_idx;
    m.prev_log_term = prev_term;
    m.entries = std::move(entries);
    m.leader_commit = lc;
    return m;
}

}  // namespace

TEST_CASE("client requests: accept on leader, redirect and unavailable elsewhere") {
    SUBCASE("leader appends at last+1 with its own term") {
        harness h(variant::baseline, 3);
        h.elect(60'000);
        h.node->on_timer(h.node->next_wakeup());
        h.node->take_outbox();
        // re-elect into term 2 via a fresh timeout is avoided; term is 1 here.
        for (int i = 0; i < 4; ++i)
            h.node->handle(envelope{3, 0, client_request{uint64_t(i + 1), 0, "x"}},
                           70'000);
        CHECK(h.node->log().last_index() == 4);
        h.node->take_outbox();
        h.node->handle(envelope{3, 0, client_request{9, 0, "y"}}, 71'000);
        CHECK(h.node->log().last_index() == 5);
        CHECK(h.node->log().entry(5).term == h.node->current_term());
    }
    SUBCASE("follower redirects to the known leader") {
        harness h(variant::baseline, 4, 1);
        auto rep = h.feed_ae(make_ae(1, 3, 0, 0, {}, 0), 3, 1000);
        CHECK(rep.success);
        h.node->handle(envelope{6, 1, client_request{5, 0, "z"}}, 2000);
        auto out = h.node->take_outbox();
        REQUIRE(out.size() == 1);
        const auto& resp = std::get<client_response>(out[0].msg);
        CHECK(resp.status == client_status::redirect);
        CHECK(resp.leader_hint == 3);
    }
    SUBCASE("candidate mid-election answers unavailable") {
        harness h(variant::baseline, 4, 1);
        h.node->on_timer(61'000);
        CHECK(h.node->current_role() == role::candidate);
        h.node->take_outbox();
        h.node->handle(envelope{6, 1, client_request{5, 0, "z"}}, 62'000);
        auto out = h.node->take_outbox();
        REQUIRE(out.size() == 1);
        CHECK(std::get<client_response>(out[0].msg).status ==
              client_status::unavailable);
    }
}

TEST_CASE("handle_append_entries replication rules") {
    SUBCASE("matching prev appends and commits to min(leaderCommit, last new)") {
        harness h(variant::baseline, 3, 1);
        auto r1 = h.feed_ae(
            make_ae(1, 0, 0, 0, {log_entry{1, "a"}, log_entry{1, "b"}}, 0), 0,
            1000);
        CHECK(r1.success);
        auto r2 = h.feed_ae(make_ae(2, 0, 2, 1, {log_entry{2, "c"}}, 2), 0, 2000);
        CHECK(r2.success);
        CHECK(r2.match_hint == 3);
        CHECK(h.node->log().last_index() == 3);
        CHECK(h.node->log().term_at(3) == 2);
        CHECK(h.node->commit_index() == 2);
        CHECK(h.applied.size() == 2);
    }
    SUBCASE("missing prev entry fails") {
        harness h(variant::baseline, 3, 1);
        h.feed_ae(make_ae(1, 0, 0, 0, {log_entry{1, "a"}}, 0), 0, 1000);
        auto rep = h.feed_ae(make_ae(1, 0, 2, 1, {log_entry{1, "c"}}, 0), 0, 2000);
        CHECK_FALSE(rep.success);
        CHECK(h.node->log().last_index() == 1);
    }
    SUBCASE("stale term is rejected with the live term") {
        harness h(variant::baseline, 3, 1);
        h.feed_ae(make_ae(3, 0, 0, 0, {}, 0), 0, 1000);
        CHECK(h.node->current_term() == 3);
        auto rep = h.feed_ae(make_ae(1, 2, 0, 0, {}, 0), 2, 2000);
        CHECK_FALSE(rep.success);
        CHECK(rep.term == 3);
    }
    SUBCASE("conflicting suffix is truncated") {
        harness h(variant::baseline, 3, 1);
        h.feed_ae(make_ae(1, 0, 0, 0,
                          {log_entry{1, "a"}, log_entry{1, "b"}, log_entry{1, "c"}},
                          0),
                  0, 1000);
        CHECK(h.node->log().last_index() == 3);
        auto rep = h.feed_ae(
            make_ae(2, 2, 1, 1, {log_entry{2, "x"}, log_entry{2, "y"}}, 0), 2,
            2000);
        CHECK(rep.success);
        CHECK(h.node->log().last_index() == 3);
        CHECK(h.node->log().entry(2).command == "x");
        CHECK(h.node->log().term_at(3) == 2);
    }
}

TEST_CASE("handle_append_entries_reply bookkeeping and repair") {
    harness h(variant::baseline, 5);
    h.elect(60'000);
    for (int i = 0; i < 7; ++i)
        h.node->handle(envelope{5, 0, client_request{uint64_t(i + 1), 0, "v"}},
                       61'000);
    h.node->take_outbox();
    term_t t = h.node->current_term();

    SUBCASE("success reply advances match/next so later sends start past it") {
        h.node->handle(envelope{1, 0, append_entries_reply{t, true, 1, 7}},
                       62'000);
        h.node->take_outbox();
        h.node->on_timer(h.node->next_wakeup());
        auto out = h.node->take_outbox();
        bool checked = false;
        for (const auto& o : out) {
            if (o.to != 1) continue;
            const auto& ae = std::get<append_entries_msg>(o.msg);
            CHECK(ae.prev_log_index == 7);  // nextIndex became 8
            CHECK(ae.entries.empty());
            checked = true;
        }
        CHECK(checked);
    }
    SUBCASE("failure decrements nextIndex and sends a repair immediately") {
        // first bring nextIndex[2] to 8 via a confirmed suffix
        h.node->handle(envelope{2, 0, append_entries_reply{t, true, 2, 7}},
                       62'000);
        h.node->take_outbox();
        h.node->handle(envelope{2, 0, append_entries_reply{t, false, 2, 6}},
                       63'000);
        auto out = h.node->take_outbox();
        REQUIRE(out.size() == 1);
        CHECK(out[0].to == 2);
        const auto& repair = std::get<append_entries_msg>(out[0].msg);
        CHECK_FALSE(repair.is_gossip);
        CHECK(repair.prev_log_index == 6);  // 8 -> 7, entries from 7
        CHECK(repair.entries.size() == 1);
    }
    SUBCASE("failure hint from a short log jumps the repair point") {
        h.node->handle(envelope{2, 0, append_entries_reply{t, true, 2, 7}},
                       62'000);
        h.node->take_outbox();
        h.node->handle(envelope{2, 0, append_entries_reply{t, false, 2, 2}},
                       63'000);
        auto out = h.node->take_outbox();
        REQUIRE(out.size() == 1);
        const auto& repair = std::get<append_entries_msg>(out[0].msg);
        CHECK(repair.prev_log_index == 2);  // straight to the hinted end
        CHECK(repair.entries.size() == 5);
    }
    SUBCASE("higher reply term forces a step down") {
        h.node->handle(envelope{3, 0, append_entries_reply{t + 3, false, 3, 0}},
                       62'000);
        CHECK(h.node->current_role() == role::follower);
        CHECK(h.node->current_term() == t + 3);
    }
}

TEST_CASE("leader commit requires a current-term majority") {
    SUBCASE("majority at 5 commits 5") {
        harness h(variant::baseline, 5);
        h.elect(60'000);
        term_t t = h.node->current_term();
        for (int i = 0; i < 5; ++i)
            h.node->handle(envelope{5, 0, client_request{uint64_t(i + 1), 0, "v"}},
                           61'000);
        h.node->handle(envelope{1, 0, append_entries_reply{t, true, 1, 5}}, 62'000);
        CHECK(h.node->commit_index() == 0);  // self + 1 < 3
        h.node->handle(envelope{2, 0, append_entries_reply{t, true, 2, 5}}, 63'000);
        CHECK(h.node->commit_index() == 5);
    }
    SUBCASE("split match indexes commit the majority point") {
        harness h(variant::baseline, 5);
        h.elect(60'000);
        term_t t = h.node->current_term();
        for (int i = 0; i < 5; ++i)
            h.node->handle(envelope{5, 0, client_request{uint64_t(i + 1), 0, "v"}},
                           61'000);
        h.node->handle(envelope{1, 0, append_entries_reply{t, true, 1, 5}}, 62'000);
        h.node->handle(envelope{2, 0, append_entries_reply{t, true, 2, 3}}, 63'000);
        CHECK(h.node->commit_index() == 3);
    }
    SUBCASE("entries from an older term do not commit by counting") {
        harness h(variant::baseline, 5, 0);
        // Old-term entries arrive while follower, then this node wins.
        h.feed_ae(make_ae(1, 1, 0, 0,
                          {log_entry{1, "a"}, log_entry{1, "b"}, log_entry{1, "c"}},
                          0),
                  1, 1000);
        h.elect(60'000);
        term_t t = h.node->current_term();
        REQUIRE(t > 1);
        h.node->handle(envelope{1, 0, append_entries_reply{t, true, 1, 3}}, 62'000);
        h.node->handle(envelope{2, 0, append_entries_reply{t, true, 2, 3}}, 63'000);
        CHECK(h.node->commit_index() == 0);  // term_at(3)=1 != current
    }
}

TEST_CASE("votes follow the up-to-date comparison and one-vote-per-term") {
    SUBCASE("longer log with equal last term is granted") {
        harness h(variant::baseline, 5, 1);
        h.feed_ae(make_ae(3, 0, 0, 0,
                          std::vector<log_entry>(5, log_entry{3, "e"}), 0),
                  0, 1000);
        h.node->handle(envelope{2, 1, request_vote_msg{3, 2, 7, 3}}, 40'000);
        auto out = h.node->take_outbox();
        REQUIRE(out.size() == 1);
        CHECK(std::get<request_vote_reply>(out[0].msg).vote_granted);
    }
    SUBCASE("a second candidate in the same term is denied") {
        harness h(variant::baseline, 5, 1);
        h.node->handle(envelope{2, 1, request_vote_msg{4, 2, 0, 0}}, 1000);
        auto first = h.node->take_outbox();
        CHECK(std::get<request_vote_reply>(first[0].msg).vote_granted);
        h.node->handle(envelope{3, 1, request_vote_msg{4, 3, 9, 4}}, 2000);
        auto second = h.node->take_outbox();
        CHECK_FALSE(std::get<request_vote_reply>(second[0].msg).vote_granted);
    }
    SUBCASE("higher last term dominates a longer log") {
        harness h(variant::baseline, 5, 1);
        h.feed_ae(make_ae(3, 0, 0, 0, {log_entry{3, "e"}}, 0), 0, 1000);
        // candidate with (term 2, index 9) against voter (term 3, index 1)
        h.node->handle(envelope{2, 1, request_vote_msg{3, 2, 9, 2}}, 40'000);
        auto out = h.node->take_outbox();
        REQUIRE(out.size() == 1);
        CHECK_FALSE(std::get<request_vote_reply>(out[0].msg).vote_granted);
    }
}

TEST_CASE("tick: election start and gossip round scheduling") {
    SUBCASE("follower past deadline becomes candidate and solicits votes") {
        harness h(variant::baseline, 4, 2);
        term_t before = h.node->current_term();
        h.node->on_timer(61'000);
        CHECK(h.node->current_role() == role::candidate);
        CHECK(h.node->current_term() == before + 1);
        auto out = h.node->take_outbox();
        int votes = 0;
        for (const auto& o : out)
            votes += std::holds_alternative<request_vote_msg>(o.msg) ? 1 : 0;
        CHECK(votes == 3);
    }
    SUBCASE("leader within the idle period emits nothing") {
        harness h(variant::v1, 3);
        h.elect(60'000);
        h.node->on_timer(h.node->next_wakeup());
        h.node->take_outbox();
        time_us due = h.node->next_wakeup();
        h.node->on_timer(due - 1000);
        CHECK(h.node->take_outbox().empty());
    }
}

TEST_CASE("apply_committed applies in order and halts on applier failure") {
    SUBCASE("applies the committed range once") {
        harness h(variant::baseline, 3, 1);
        h.feed_ae(make_ae(1, 0, 0, 0,
                          std::vector<log_entry>(5, log_entry{1, "k"}), 3),
                  0, 1000);
        CHECK(h.node->commit_index() == 3);
        CHECK(h.node->last_applied() == 3);
        CHECK(h.applied.size() == 3);
        h.feed_ae(make_ae(1, 0, 5, 1, {}, 5), 0, 2000);
        CHECK(h.applied.size() == 5);
        CHECK(h.applied[4].first == 5);

        // no-op when nothing new commits
        h.feed_ae(make_ae(1, 0, 5, 1, {}, 5), 0, 3000);
        CHECK(h.applied.size() == 5);
    }
    SUBCASE("applier failure halts the node like a crash") {
        harness h(variant::baseline, 3, 1, true);
        h.node->handle(
            envelope{0, 1, make_ae(1, 0, 0, 0, {log_entry{1, "k"}}, 1)}, 1000);
        CHECK(h.node->halted());
        CHECK(h.node->take_outbox().empty());
        // further input is ignored
        h.node->handle(envelope{0, 1, make_ae(1, 0, 1, 1, {}, 1)}, 2000);
        CHECK(h.node->take_outbox().empty());
    }
}

TEST_CASE("V2 nodes drive commitIndex through the shared structures only") {
    harness h(variant::v2, 5);
    h.elect(60'000);
    term_t t = h.node->current_term();
    h.node->handle(envelope{5, 0, client_request{1, 0, "v"}}, 61'000);
    h.node->take_outbox();
    CHECK(h.node->commit_state().bm.test(0));  // own bit after append

    // Success replies alone never commit (classic counting is disabled).
    h.node->handle(envelope{1, 0, append_entries_reply{t, true, 1, 1}}, 62'000);
    h.node->handle(envelope{2, 0, append_entries_reply{t, true, 2, 1}}, 62'100);
    h.node->handle(envelope{3, 0, append_entries_reply{t, true, 3, 1}}, 62'200);
    CHECK(h.node->commit_index() == 0);

    // A relayed copy of the round carrying two more bits completes the
    // majority at the leader epidemically.
    append_entries_msg relay = make_ae(t, 0, 0, 0, {log_entry{t, "v"}}, 0);
    relay.is_gossip = true;
    relay.round_lc = h.node->round_lc();
    bitmap bm(5);
    bm.set(1);
    bm.set(2);
    relay.commit = commit_fields{bm, 0, 1};
    h.node->handle(envelope{2, 0, relay}, 63'000);
    CHECK(h.node->commit_state().max_commit == 1);
    CHECK(h.node->commit_index() == 1);
}

TEST_CASE("election resets the V2 structures") {
    harness h(variant::v2, 5, 1);  // majority 3, so two bits stay visible
    append_entries_msg m = make_ae(1, 0, 0, 0, {log_entry{1, "a"}}, 0);
    bitmap bm(5);
    bm.set(0);
    m.commit = commit_fields{bm, 0, 1};
    m.is_gossip = true;
    m.round_lc = 1;
    h.node->handle(envelope{0, 1, m}, 1000);
    h.node->take_outbox();
    CHECK(h.node->commit_state().bm.ones() == 2);  // leader's + own

    h.node->on_timer(61'000);  // start election
    CHECK(h.node->current_role() == role::candidate);
    CHECK(h.node->commit_state().bm.ones() == 0);
    CHECK(h.node->commit_state().next_commit ==
          h.node->commit_state().max_commit + 1);
}
