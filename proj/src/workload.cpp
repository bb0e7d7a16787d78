#include "raftsim/workload.hpp"

#include <cstdio>

namespace raftsim {

namespace {

constexpr uint64_t kPoll = 0, kStart = 1, kTimeout = 2, kResend = 3;

uint64_t make_tag(uint64_t kind, uint64_t rid, uint32_t attempt, uint32_t c) {
    return (kind << 60) | ((rid & 0xFFFFFFFULL) << 32) |
           (uint64_t(attempt & 0xFFFF) << 16) | (c & 0xFFFF);
}

}  // namespace

client_pool::client_pool(const client_config& cfg, uint32_t n, simulation& sim)
    : cfg_(cfg), n_(n), clients_(cfg.m) {
    if (cfg_.rate_rps > 0.0)
        pacing_interval_ = time_us(1e6 * double(cfg_.m) / cfg_.rate_rps);
    // Load begins once a leader exists.
    sim.schedule_actor_timer(client_addr(0), 0, make_tag(kPoll, 0, 0, 0));
}

void client_pool::emit(simulation& sim, time_us t, uint32_t c, const char* ev,
                       int64_t a, int64_t b, int64_t cc) {
    trace_record r;
    r.t = t;
    r.kind = trace_kind::client;
    r.node = client_addr(c);
    r.s = ev;
    r.a = a;
    r.b = b;
    r.c = cc;
    sim.trace().on_record(r);
}

void client_pool::start_request(simulation& sim, uint32_t c, time_us now) {
    if (cfg_.stop_after > 0 && now >= cfg_.stop_after) return;
    client& cl = clients_[c];
    cl.request_id = next_request_id_++;
    cl.attempt = 0;
    cl.arrival = now;
    cl.busy = true;
    cl.target = cl.believed_leader >= 0 ? cl.believed_leader
                                        : int64_t(sim.workload_rng().below(n_));
    emit(sim, now, c, "arr", int64_t(cl.request_id), 0, 0);
    send_attempt(sim, c, now);
}

void client_pool::send_attempt(simulation& sim, uint32_t c, time_us now) {
    client& cl = clients_[c];
    char hdr[64];
    snprintf(hdr, sizeof hdr, "c%u:r%llu:a%u:", c,
             (unsigned long long)cl.request_id, cl.attempt);
    client_request q;
    q.request_id = cl.request_id;
    q.attempt = cl.attempt;
    q.command = hdr;
    if (q.command.size() < cfg_.command_size)
        q.command.resize(cfg_.command_size, 'x');
    sim.actor_send(client_addr(c), node_id(cl.target), q, now);
    sim.schedule_actor_timer(
        client_addr(c), now + cfg_.request_timeout,
        make_tag(kTimeout, cl.request_id, cl.attempt, c));
}

void client_pool::finish_request(simulation& sim, uint32_t c, time_us now,
                                 bool ok) {
    client& cl = clients_[c];
    cl.busy = false;
    if (ok) completed_ += 1;
    else failed_ += 1;
    time_us next = now;
    if (pacing_interval_ > 0)
        next = std::max(now, cl.earliest_next);
    cl.earliest_next = next + pacing_interval_;
    if (next <= now) {
        start_request(sim, c, now);
    } else {
        sim.schedule_actor_timer(client_addr(c), next, make_tag(kStart, 0, 0, c));
    }
}

void client_pool::deliver(simulation& sim, const envelope& env, time_us now) {
    const auto* resp = std::get_if<client_response>(&env.payload);
    if (!resp) return;
    uint32_t c = env.to - n_;
    client& cl = clients_[c];
    if (!cl.busy || resp->request_id != cl.request_id) return;  // stale

    if (resp->status == client_status::ok) {
        cl.believed_leader = resp->leader_hint;
        emit(sim, now, c, "rsp", int64_t(cl.request_id), now - cl.arrival,
             resp->index);
        finish_request(sim, c, now, true);
        return;
    }
    if (resp->attempt != cl.attempt) return;  // stale redirect/unavailable

    cl.attempt += 1;
    if (int(cl.attempt) > cfg_.retry_budget) {
        emit(sim, now, c, "fail", int64_t(cl.request_id), 0, cl.attempt);
        finish_request(sim, c, now, false);
        return;
    }
    if (resp->status == client_status::redirect && resp->leader_hint >= 0) {
        emit(sim, now, c, "rdr", int64_t(cl.request_id), resp->leader_hint,
             cl.attempt);
        cl.target = resp->leader_hint;
        cl.believed_leader = resp->leader_hint;
        send_attempt(sim, c, now);
    } else {
        emit(sim, now, c, "una", int64_t(cl.request_id), 0, cl.attempt);
        cl.believed_leader = -1;
        cl.target = int64_t(sim.workload_rng().below(n_));
        sim.schedule_actor_timer(
            client_addr(c), now + cfg_.request_timeout / 4,
            make_tag(kResend, cl.request_id, cl.attempt, c));
    }
}

void client_pool::timer(simulation& sim, uint64_t tag, time_us now) {
    uint64_t kind = tag >> 60;
    uint32_t c = uint32_t(tag & 0xFFFF);
    uint64_t rid = (tag >> 32) & 0xFFFFFFFULL;
    uint32_t attempt = uint32_t((tag >> 16) & 0xFFFF);

    if (kind == kPoll) {
        if (sim.current_leader() >= 0) {
            load_start_ = now;
            for (uint32_t i = 0; i < cfg_.m; ++i) start_request(sim, i, now);
        } else {
            sim.schedule_actor_timer(client_addr(0), now + 10'000,
                                     make_tag(kPoll, 0, 0, 0));
        }
        return;
    }
    if (kind == kStart) {
        if (!clients_[c].busy) start_request(sim, c, now);
        return;
    }

    client& cl = clients_[c];
    if (!cl.busy || (cl.request_id & 0xFFFFFFFULL) != rid || cl.attempt != attempt)
        return;  // stale timer

    if (kind == kResend) {
        send_attempt(sim, c, now);
        return;
    }
    // timeout
    cl.attempt += 1;
    if (int(cl.attempt) > cfg_.retry_budget) {
        emit(sim, now, c, "fail", int64_t(cl.request_id), 0, cl.attempt);
        finish_request(sim, c, now, false);
        return;
    }
    emit(sim, now, c, "tmo", int64_t(cl.request_id), 0, cl.attempt);
    cl.believed_leader = -1;
    cl.target = int64_t(sim.workload_rng().below(n_));
    send_attempt(sim, c, now);
}

}  // namespace raftsim
