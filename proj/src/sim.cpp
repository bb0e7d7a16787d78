#include "raftsim/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>

namespace raftsim {

double cost_model::message_cost(const message& m) const {
    if (auto* ae = std::get_if<append_entries_msg>(&m)) {
        double c = ae_base + ae_per_entry * double(ae->entries.size());
        if (ae->commit) c += per_bitmap_bit * double(ae->commit->bm.size());
        return c;
    }
    if (auto* r = std::get_if<append_entries_reply>(&m)) {
        double c = reply;
        if (r->commit) c += per_bitmap_bit * double(r->commit->bm.size());
        return c;
    }
    if (std::holds_alternative<request_vote_msg>(m)) return vote;
    if (std::holds_alternative<request_vote_reply>(m)) return vote_reply;
    if (std::holds_alternative<client_request>(m)) return client_req;
    return client_resp;
}

std::string describe_fault(const fault_action& f) {
    char buf[96];
    switch (f.k) {
        case fault_action::kind::crash:
            snprintf(buf, sizeof buf, "crash node=%d", f.node);
            return buf;
        case fault_action::kind::recover:
            snprintf(buf, sizeof buf, "recover node=%d", f.node);
            return buf;
        case fault_action::kind::crash_leader:
            snprintf(buf, sizeof buf, "crashleader down_us=%lld",
                     (long long)f.down_us);
            return buf;
        case fault_action::kind::partition: {
            std::string s = "partition groups=";
            for (size_t g = 0; g < f.groups.size(); ++g) {
                if (g) s += '|';
                for (size_t i = 0; i < f.groups[g].size(); ++i) {
                    if (i) s += ',';
                    s += std::to_string(f.groups[g][i]);
                }
            }
            return s;
        }
        case fault_action::kind::heal:
            return "heal";
        case fault_action::kind::set_loss:
            snprintf(buf, sizeof buf, "setloss %d->%d %.3f", f.from, f.to, f.p);
            return buf;
    }
    return "?";
}

simulation::simulation(const sim_params& params, trace_sink* sink)
    : params_(params),
      sink_(sink ? sink : &null_),
      net_rng_(rng(params.seed).fork(0xA1)),
      workload_rng_(rng(params.seed).fork(0xB2)),
      topo_(params.topo) {
    uint32_t n = params_.topo.n();
    crashed_.assign(n, 0);
    durable_.resize(n);
    busy_until_.assign(n, 0);
    timer_gen_.assign(n, 0);
    scheduled_wakeup_.assign(n, -1);
    appended_seen_.assign(n, 0);
    inbox_.resize(n);
    drain_scheduled_.assign(n, 0);
    inbox_gen_.assign(n, 0);
    timer_streak_.assign(n, 0);
    partition_group_.assign(n, -1);
    node_stats_.resize(n);
    rng node_seeds = rng(params.seed).fork(0xC3);
    for (uint32_t i = 0; i < n; ++i) {
        applier_fn ap;
        if (params_.applier_factory) ap = params_.applier_factory(i);
        nodes_.push_back(std::make_unique<raft_node>(
            i, params_.node, node_seeds.next(), sink_, std::move(ap)));
    }
}

void simulation::register_actor(node_id id, sim_actor* a) {
    uint32_t n = params_.topo.n();
    assert(id >= n);
    if (actors_.size() <= id - n) actors_.resize(id - n + 1, nullptr);
    actors_[id - n] = a;
}

void simulation::push(sim_event ev) {
    ev.seq = seq_++;
    queue_.push(std::move(ev));
}

void simulation::schedule_actor_timer(node_id actor_id, time_us t, uint64_t tag) {
    sim_event ev;
    ev.t = std::max(t, now_);
    ev.k = sim_event::kind::actor_timer;
    ev.node = actor_id;
    ev.tag = tag;
    push(std::move(ev));
}

bool simulation::reachable_now(node_id i, node_id j) const {
    uint32_t n = params_.topo.n();
    if (i >= n || j >= n) return true;  // client links are always up
    if (!topo_.reachable(i, j)) return false;
    if (partition_active_ && partition_group_[i] != partition_group_[j])
        return false;
    return true;
}

void simulation::dispatch_send(node_id from, node_id to, const message& m,
                               time_us now) {
    uint32_t n = params_.topo.n();
    auto& link = links_[{from, to}];
    link.sent += 1;
    if (from < n) node_stats_[from].sent += 1;

    trace_record r;
    r.t = now;
    r.kind = trace_kind::send;
    r.node = from;
    r.peer = to;
    r.mk = kind_of(m);
    r.s = summarize_message(m);

    if (!reachable_now(from, to)) {
        r.outcome = send_outcome::unreachable;
        link.unreachable += 1;
        sink_->on_record(r);
        return;
    }
    bool node_link = from < n && to < n;
    if (node_link) {
        double p = topo_.loss(from, to);
        if (p > 0.0 && net_rng_.unit() < p) {
            r.outcome = send_outcome::lost;
            link.lost += 1;
            sink_->on_record(r);
            return;
        }
    }
    r.outcome = send_outcome::ok;
    sink_->on_record(r);

    const latency_spec& spec = node_link ? topo_.latency : params_.client_latency;
    double delay_ms = net_rng_.triangular(spec.min_ms, spec.mode_ms, spec.max_ms);
    sim_event ev;
    ev.t = now + time_us(delay_ms * 1000.0);
    ev.k = sim_event::kind::deliver;
    ev.env = envelope{from, to, m};
    push(std::move(ev));
}

void simulation::actor_send(node_id from, node_id to, message m, time_us now) {
    dispatch_send(from, to, std::move(m), now);
}

void simulation::reschedule_wakeup(uint32_t i) {
    time_us wk = crashed_[i] ? -1 : nodes_[i]->next_wakeup();
    if (wk == scheduled_wakeup_[i]) return;
    scheduled_wakeup_[i] = wk;
    ++timer_gen_[i];
    if (wk < 0) return;
    sim_event ev;
    ev.t = std::max(wk, now_);
    ev.k = sim_event::kind::node_timer;
    ev.prio = 0;
    ev.node = i;
    ev.gen = timer_gen_[i];
    push(std::move(ev));
}

void simulation::finish_node_step(uint32_t i, time_us start, double units) {
    auto out = nodes_[i]->take_outbox();
    uint64_t appended = nodes_[i]->appended_total();
    units += params_.costs.log_append * double(appended - appended_seen_[i]);
    appended_seen_[i] = appended;
    for (const auto& o : out) units += params_.costs.message_cost(o.msg);
    node_stats_[i].cost_units += units;
    time_us completion =
        start + time_us(units * params_.costs.service_us_per_unit);
    busy_until_[i] = completion;
    for (auto& o : out) dispatch_send(i, o.to, o.msg, start);
    if (nodes_[i]->halted() && !crashed_[i]) {
        // Applier failure: the node stays down for the rest of the run.
        crashed_[i] = 1;
        ++timer_gen_[i];
        scheduled_wakeup_[i] = -1;
        inbox_[i].clear();
        drain_scheduled_[i] = 0;
        ++inbox_gen_[i];
        return;
    }
    reschedule_wakeup(i);
}

void simulation::run_node_handle(uint32_t i, time_us t, const envelope& env) {
    timer_streak_[i] = 0;
    trace_record r;
    r.t = t;
    r.kind = trace_kind::recv;
    r.node = i;
    r.peer = env.from;
    r.mk = kind_of(env.payload);
    sink_->on_record(r);
    double units = params_.costs.message_cost(env.payload);
    nodes_[i]->handle(env, t);
    finish_node_step(i, t, units);
}

void simulation::schedule_drain(uint32_t i, time_us t) {
    drain_scheduled_[i] = 1;
    sim_event ev;
    ev.t = std::max(t, now_);
    ev.k = sim_event::kind::drain;
    ev.node = i;
    ev.gen = inbox_gen_[i];
    push(std::move(ev));
}

void simulation::process_node_deliver(sim_event& ev) {
    uint32_t i = ev.env.to;
    if (crashed_[i]) {
        links_[{ev.env.from, ev.env.to}].dropped_down += 1;
        return;
    }
    links_[{ev.env.from, ev.env.to}].delivered += 1;
    node_stats_[i].received += 1;
    if (!drain_scheduled_[i] && inbox_[i].empty() && ev.t >= busy_until_[i]) {
        run_node_handle(i, ev.t, ev.env);
        return;
    }
    inbox_[i].push_back(std::move(ev.env));
    if (!drain_scheduled_[i]) schedule_drain(i, busy_until_[i]);
}

void simulation::process_drain(sim_event& ev) {
    uint32_t i = ev.node;
    if (crashed_[i] || ev.gen != inbox_gen_[i]) return;
    if (ev.t < busy_until_[i]) {  // a timer slipped in; try again when free
        ev.t = busy_until_[i];
        push(std::move(ev));
        return;
    }
    drain_scheduled_[i] = 0;
    if (inbox_[i].empty()) return;
    envelope env = std::move(inbox_[i].front());
    inbox_[i].pop_front();
    run_node_handle(i, ev.t, env);
    if (!crashed_[i] && !inbox_[i].empty()) schedule_drain(i, busy_until_[i]);
}

void simulation::process_node_timer(sim_event& ev) {
    uint32_t i = ev.node;
    if (crashed_[i] || ev.gen != timer_gen_[i]) return;
    if (ev.t < busy_until_[i]) {
        ev.t = busy_until_[i];
        push(std::move(ev));
        return;
    }
    // Fairness under overload: two timer fires never run back to back while
    // input is waiting, otherwise a leader whose broadcast costs a whole
    // period would never read a reply again.
    if (timer_streak_[i] && !inbox_[i].empty()) {
        envelope env = std::move(inbox_[i].front());
        inbox_[i].pop_front();
        run_node_handle(i, ev.t, env);
        if (!crashed_[i] && ev.gen == timer_gen_[i]) {
            ev.t = std::max(busy_until_[i], ev.t);
            push(std::move(ev));
        }
        return;
    }
    timer_streak_[i] = 1;
    nodes_[i]->on_timer(ev.t);
    finish_node_step(i, ev.t, 0.0);
}

void simulation::emit_fault(time_us t, const std::string& desc) {
    trace_record r;
    r.t = t;
    r.kind = trace_kind::fault;
    r.s = desc;
    sink_->on_record(r);
}

void simulation::crash_node(uint32_t i, time_us now) {
    if (crashed_[i]) return;  // crash of a crashed node is a no-op
    durable_[i] = nodes_[i]->durable_image();
    crashed_[i] = 1;
    busy_until_[i] = now;
    ++timer_gen_[i];
    scheduled_wakeup_[i] = -1;
    inbox_[i].clear();
    drain_scheduled_[i] = 0;
    ++inbox_gen_[i];
    emit_fault(now, "crash node=" + std::to_string(i));
}

void simulation::recover_node(uint32_t i, time_us now) {
    if (!crashed_[i]) return;  // recover without prior crash is a no-op
    crashed_[i] = 0;
    busy_until_[i] = now;
    ++inbox_gen_[i];
    nodes_[i]->restore(durable_[i], now);
    emit_fault(now, "recover node=" + std::to_string(i));
    reschedule_wakeup(i);
}

void simulation::apply_fault(const fault_action& f, time_us now) {
    switch (f.k) {
        case fault_action::kind::crash:
            if (f.node >= 0 && uint32_t(f.node) < n()) crash_node(f.node, now);
            return;
        case fault_action::kind::recover:
            if (f.node >= 0 && uint32_t(f.node) < n()) recover_node(f.node, now);
            return;
        case fault_action::kind::crash_leader: {
            int64_t leader = current_leader();
            if (leader < 0) {
                emit_fault(now, "crashleader no-leader");
                return;
            }
            crash_node(uint32_t(leader), now);
            if (f.down_us > 0) {
                fault_action rec;
                rec.k = fault_action::kind::recover;
                rec.node = int32_t(leader);
                rec.t = now + f.down_us;
                params_.faults.push_back(rec);
                sim_event ev;
                ev.t = rec.t;
                ev.k = sim_event::kind::fault;
                ev.prio = 0;
                ev.fault_idx = params_.faults.size() - 1;
                push(std::move(ev));
            }
            return;
        }
        case fault_action::kind::partition: {
            partition_active_ = true;
            partition_group_.assign(n(), -1);
            for (size_t g = 0; g < f.groups.size(); ++g)
                for (uint32_t id : f.groups[g])
                    if (id < n()) partition_group_[id] = int32_t(g);
            // unlisted nodes share an implicit extra group
            for (auto& g : partition_group_)
                if (g == -1) g = int32_t(f.groups.size());
            emit_fault(now, describe_fault(f));
            return;
        }
        case fault_action::kind::heal:
            partition_active_ = false;
            emit_fault(now, "heal");
            return;
        case fault_action::kind::set_loss:
            if (f.from >= 0 && f.to >= 0 && uint32_t(f.from) < n() &&
                uint32_t(f.to) < n())
                topo_.set_loss(node_id(f.from), node_id(f.to), f.p);
            emit_fault(now, describe_fault(f));
            return;
    }
}

int64_t simulation::current_leader() const {
    int64_t best = -1;
    term_t best_term = -1;
    for (uint32_t i = 0; i < n(); ++i) {
        if (crashed_[i]) continue;
        if (nodes_[i]->current_role() == role::leader &&
            nodes_[i]->current_term() > best_term) {
            best = i;
            best_term = nodes_[i]->current_term();
        }
    }
    return best;
}

bool simulation::run(std::string* error) {
    uint32_t n_nodes = n();
    for (uint32_t i = 0; i < n_nodes; ++i) {
        nodes_[i]->start(0);
        if (params_.first_leader == int32_t(i))
            nodes_[i]->prime_election(params_.node.election_timeout / 2);
        finish_node_step(i, 0, 0.0);
    }
    for (size_t fi = 0; fi < params_.faults.size(); ++fi) {
        sim_event ev;
        ev.t = params_.faults[fi].t;
        ev.k = sim_event::kind::fault;
        ev.prio = 0;
        ev.fault_idx = fi;
        push(std::move(ev));
    }

    uint64_t processed = 0;
    while (!queue_.empty()) {
        sim_event ev = queue_.top();
        if (ev.t > params_.until) break;
        queue_.pop();
        now_ = ev.t;
        ++processed;
        switch (ev.k) {
            case sim_event::kind::deliver:
                if (ev.env.to < n_nodes) {
                    process_node_deliver(ev);
                } else {
                    uint32_t idx = ev.env.to - n_nodes;
                    if (idx < actors_.size() && actors_[idx]) {
                        trace_record r;
                        r.t = ev.t;
                        r.kind = trace_kind::recv;
                        r.node = ev.env.to;
                        r.peer = ev.env.from;
                        r.mk = kind_of(ev.env.payload);
                        sink_->on_record(r);
                        links_[{ev.env.from, ev.env.to}].delivered += 1;
                        actors_[idx]->deliver(*this, ev.env, ev.t);
                    }
                }
                break;
            case sim_event::kind::node_timer:
                process_node_timer(ev);
                break;
            case sim_event::kind::drain:
                process_drain(ev);
                break;
            case sim_event::kind::actor_timer: {
                uint32_t idx = ev.node - n_nodes;
                if (idx < actors_.size() && actors_[idx])
                    actors_[idx]->timer(*this, ev.tag, ev.t);
                break;
            }
            case sim_event::kind::fault:
                apply_fault(params_.faults[ev.fault_idx], ev.t);
                break;
        }
    }

    // Remaining scheduled deliveries are in flight at the end of the run.
    while (!queue_.empty()) {
        const sim_event& ev = queue_.top();
        if (ev.k == sim_event::kind::deliver)
            links_[{ev.env.from, ev.env.to}].inflight += 1;
        queue_.pop();
    }

    for (uint32_t i = 0; i < n_nodes; ++i) {
        trace_record r;
        r.t = params_.until;
        r.kind = trace_kind::cost;
        r.node = i;
        r.units = node_stats_[i].cost_units;
        r.a = node_stats_[i].sent;
        r.b = node_stats_[i].received;
        sink_->on_record(r);
    }
    trace_record endr;
    endr.t = params_.until;
    endr.kind = trace_kind::end;
    endr.a = int64_t(processed);
    sink_->on_record(endr);

    if (!conservation_holds()) {
        if (error) *error = "message conservation violated";
        return false;
    }
    return true;
}

bool simulation::conservation_holds() const {
    for (const auto& [key, c] : links_) {
        if (c.sent != c.delivered + c.lost + c.unreachable + c.dropped_down +
                          c.inflight)
            return false;
    }
    return true;
}

}  // namespace raftsim
