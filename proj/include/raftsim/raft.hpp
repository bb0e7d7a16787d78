#pragma once
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "raftsim/commit.hpp"
#include "raftsim/gossip.hpp"
#include "raftsim/messages.hpp"
#include "raftsim/rng.hpp"
#include "raftsim/trace.hpp"
#include "raftsim/types.hpp"

namespace raftsim {

struct node_config {
    variant var = variant::baseline;
    uint32_t n = 3;
    uint32_t fanout = 3;
    time_us election_timeout = 30'000;  // T; deadlines drawn uniformly in [T, 2T]
    time_us round_period = 6'000;       // leader replication round period
    time_us idle_period = 15'000;       // heartbeat period once fully committed
    bool gossip_relay = true;
    bool baseline_immediate = true;     // baseline replicates on accept
};

struct outbound {
    node_id to;
    message msg;
};

// Deterministic state-machine hook; returning false halts the node
// (simulated crash), preserving state machine safety.
using applier_fn = std::function<bool(index_t, const log_entry&)>;

// Durable image: what survives a crash.
struct durable_state {
    term_t term = 0;
    int64_t voted_for = -1;  // -1: none
    replicated_log log;
};

// One Raft process. Pure event-in/messages-out; owned and driven by a single
// execution context. All randomness comes from the seeded streams so equal
// seeds replay byte-identical behavior.
class raft_node {
public:
    raft_node(node_id self, const node_config& cfg, uint64_t seed,
              trace_sink* sink, applier_fn applier = {});

    // Begins as follower with a randomized election deadline.
    void start(time_us now);

    // Restores the durable image after a crash; volatile state is fresh.
    void restore(const durable_state& d, time_us now);

    // Shortens the first election deadline so this node wins the opening
    // election (stable-leader experiment phases).
    void prime_election(time_us deadline) { election_deadline_ = deadline; }

    void handle(const envelope& env, time_us now);
    void on_timer(time_us now);

    std::vector<outbound> take_outbox() { return std::move(outbox_); }
    time_us next_wakeup() const;

    durable_state durable_image() const {
        return durable_state{term_, voted_for_ ? int64_t(*voted_for_) : -1, log_};
    }

    // Introspection (tests, metrics, simulator bookkeeping).
    node_id id() const { return self_; }
    role current_role() const { return role_; }
    term_t current_term() const { return term_; }
    index_t commit_index() const { return commit_index_; }
    index_t last_applied() const { return last_applied_; }
    const replicated_log& log() const { return log_; }
    int64_t known_leader() const { return known_leader_; }
    uint64_t round_lc() const { return round_lc_; }
    uint64_t gossip_round_seen() const { return seen_.round_lc; }
    const commit::commit_state& commit_state() const { return cstate_; }
    bool halted() const { return halted_; }
    uint64_t appended_total() const { return appended_total_; }

private:
    // --- role machine ---
    void become_follower();
    void adopt_term(term_t t, time_us now);
    void start_election(time_us now);
    void become_leader(time_us now);
    void reset_election_deadline(time_us now);

    // --- replication ---
    void on_append_entries(const envelope& env, time_us now);
    void on_append_entries_reply(const envelope& env, time_us now);
    void on_request_vote(const envelope& env, time_us now);
    void on_vote_reply(const envelope& env, time_us now);
    void on_client_request(const envelope& env, time_us now);

    void leader_broadcast(time_us now);
    void leader_start_round(time_us now);
    void send_append_to(node_id peer, time_us now, bool allow_heartbeat);
    void send_heartbeat_to(node_id peer, time_us now);
    append_entries_msg build_round_message() const;

    void advance_commit_leader(time_us now);
    void advance_commit(index_t new_ci, time_us now);
    void apply_committed(time_us now);
    void after_log_change(time_us now);  // V2 bit/update/commit pipeline
    void halt(time_us now);

    // --- bookkeeping/trace ---
    void send(node_id to, message m);
    void emit_state(time_us now);
    void emit_cstate(time_us now);
    void emit_append(time_us now, index_t idx, const log_entry& e);

    struct pending_client {
        node_id client;
        uint64_t request_id;
        uint32_t attempt;
    };

    struct leader_state {
        std::vector<index_t> next_index;
        std::vector<index_t> match_index;
        std::vector<time_us> last_repair;
        // Optimistic pipeline cursor: next index to stream to an in-sync
        // follower; 0 while the follower is under repair.
        std::vector<index_t> send_next;
        std::map<index_t, pending_client> pending;
    };

    node_id self_;
    node_config cfg_;
    trace_sink* sink_;
    applier_fn applier_;
    uint64_t seed_;
    uint32_t incarnation_ = 0;
    rng timer_rng_;
    rng walker_rng_;

    role role_ = role::follower;
    term_t term_ = 0;
    std::optional<node_id> voted_for_;
    replicated_log log_;
    index_t commit_index_ = 0;
    index_t last_applied_ = 0;
    int64_t known_leader_ = -1;

    uint64_t round_lc_ = 0;            // leader round counter (current term)
    gossip::gossip_seen seen_;
    gossip::permutation_walker walker_;
    commit::commit_state cstate_;

    std::optional<leader_state> lead_;
    std::set<node_id> votes_;

    time_us election_deadline_ = 0;
    time_us heartbeat_due_ = 0;
    bool halted_ = false;
    uint64_t appended_total_ = 0;

    std::vector<outbound> outbox_;
};

}  // namespace raftsim
