#pragma once
#include <deque>
#include <map>
#include <memory>
#include <queue>
#include <vector>

#include "raftsim/raft.hpp"
#include "raftsim/topology.hpp"
#include "raftsim/trace.hpp"

namespace raftsim {

// Cost units accrued per message processed (send and receive each pay the
// marshal/handling cost) plus per entry appended to the log. Units convert to
// node busy-time through service_us_per_unit, which is what creates queueing
// and saturation behavior. Kind weights are roughly size-proportional: an
// entry-carrying AppendEntries costs its base plus a per-entry term, while
// fixed-size acks and votes are an order of magnitude lighter.
struct cost_model {
    double ae_base = 1.0;
    double ae_per_entry = 0.1;
    double per_bitmap_bit = 0.001;
    double reply = 0.1;
    double vote = 0.3;
    double vote_reply = 0.1;
    double client_req = 0.3;
    double client_resp = 0.1;
    double log_append = 0.1;
    double service_us_per_unit = 45.0;

    double message_cost(const message& m) const;
};

// Client-side endpoint living outside the replica group (ids >= n).
class simulation;
class sim_actor {
public:
    virtual ~sim_actor() = default;
    virtual void deliver(simulation& sim, const envelope& env, time_us now) = 0;
    virtual void timer(simulation& sim, uint64_t tag, time_us now) = 0;
};

struct sim_params {
    node_config node;
    topology topo;
    latency_spec client_latency;  // client<->node links (lossless)
    std::vector<fault_action> faults;
    time_us until = 10'000'000;
    uint64_t seed = 1;
    cost_model costs;
    int32_t first_leader = -1;  // node primed to win the first election
    std::function<applier_fn(node_id)> applier_factory;
};

struct link_counters {
    int64_t sent = 0;
    int64_t delivered = 0;
    int64_t lost = 0;
    int64_t unreachable = 0;
    int64_t dropped_down = 0;  // target crashed at delivery time
    int64_t inflight = 0;      // scheduled past the end of the run
};

struct node_counters {
    double cost_units = 0.0;
    int64_t sent = 0;
    int64_t received = 0;
};

// Deterministic single-context discrete-event simulator. Events pop in
// (time, sequence) order; nodes are single servers whose processing cost
// delays both their own handling and their outbound departures.
class simulation {
public:
    simulation(const sim_params& params, trace_sink* sink);

    void register_actor(node_id id, sim_actor* a);

    // Runs to params.until. Returns false with a diagnostic on internal error.
    bool run(std::string* error = nullptr);

    // --- API used by nodes' host loop and client actors ---
    void actor_send(node_id from, node_id to, message m, time_us now);
    void schedule_actor_timer(node_id actor_id, time_us t, uint64_t tag);
    trace_sink& trace() { return *sink_; }
    rng& workload_rng() { return workload_rng_; }
    time_us now() const { return now_; }
    time_us until() const { return params_.until; }

    int64_t current_leader() const;
    uint32_t n() const { return params_.topo.n(); }
    const raft_node& node(uint32_t i) const { return *nodes_[i]; }
    bool crashed(uint32_t i) const { return crashed_[i]; }

    const std::vector<node_counters>& node_stats() const { return node_stats_; }
    const std::map<std::pair<node_id, node_id>, link_counters>& link_stats() const {
        return links_;
    }
    bool conservation_holds() const;

private:
    struct sim_event {
        time_us t = 0;
        uint64_t seq = 0;
        enum class kind { deliver, node_timer, drain, actor_timer, fault } k;
        int prio = 1;  // 0: timers/faults fire before deliveries at equal times
        envelope env;
        uint32_t node = 0;
        uint64_t gen = 0;
        uint64_t tag = 0;
        size_t fault_idx = 0;
    };
    struct event_order {
        bool operator()(const sim_event& a, const sim_event& b) const {
            if (a.t != b.t) return a.t > b.t;
            if (a.prio != b.prio) return a.prio > b.prio;
            return a.seq > b.seq;
        }
    };

    void push(sim_event ev);
    void dispatch_send(node_id from, node_id to, const message& m, time_us now);
    void process_node_deliver(sim_event& ev);
    void process_node_timer(sim_event& ev);
    void process_drain(sim_event& ev);
    void run_node_handle(uint32_t i, time_us t, const envelope& env);
    void schedule_drain(uint32_t i, time_us t);
    void finish_node_step(uint32_t i, time_us start, double units);
    void reschedule_wakeup(uint32_t i);
    void apply_fault(const fault_action& f, time_us now);
    void crash_node(uint32_t i, time_us now);
    void recover_node(uint32_t i, time_us now);
    bool reachable_now(node_id i, node_id j) const;
    void emit_fault(time_us t, const std::string& desc);

    sim_params params_;
    trace_sink* sink_;
    null_sink null_;

    std::vector<std::unique_ptr<raft_node>> nodes_;
    std::vector<sim_actor*> actors_;  // indexed by id - n
    std::vector<uint8_t> crashed_;
    std::vector<durable_state> durable_;
    std::vector<time_us> busy_until_;
    std::vector<uint64_t> timer_gen_;
    std::vector<time_us> scheduled_wakeup_;
    std::vector<uint64_t> appended_seen_;
    std::vector<std::deque<envelope>> inbox_;  // FIFO while the node is busy
    std::vector<uint8_t> drain_scheduled_;
    std::vector<uint64_t> inbox_gen_;  // bumped on crash/recover
    std::vector<uint8_t> timer_streak_;  // consecutive timer fires, for fairness
    std::vector<int32_t> partition_group_;  // -1: no partition active
    bool partition_active_ = false;

    std::priority_queue<sim_event, std::vector<sim_event>, event_order> queue_;
    uint64_t seq_ = 0;
    time_us now_ = 0;

    rng net_rng_;
    rng workload_rng_;

    std::vector<node_counters> node_stats_;
    std::map<std::pair<node_id, node_id>, link_counters> links_;
    topology topo_;  // live copy (set_loss mutates)
};

}  // namespace raftsim
