#include "raftsim/raft.hpp"

#include <algorithm>
#include <cassert>

namespace raftsim {

raft_node::raft_node(node_id self, const node_config& cfg, uint64_t seed,
                     trace_sink* sink, applier_fn applier)
    : self_(self),
      cfg_(cfg),
      sink_(sink),
      applier_(std::move(applier)),
      seed_(seed),
      timer_rng_(seed),
      walker_rng_(seed),
      cstate_(cfg.n, self) {}

void raft_node::start(time_us now) {
    rng base(seed_ + uint64_t(incarnation_) * 0x9e3779b9ULL);
    timer_rng_ = base.fork(1);
    walker_rng_ = base.fork(2);
    walker_ = gossip::new_walker(cfg_.n, self_, cfg_.fanout, walker_rng_);
    reset_election_deadline(now);
    heartbeat_due_ = 0;
    emit_state(now);
    if (cfg_.var == variant::v2) emit_cstate(now);
}

void raft_node::restore(const durable_state& d, time_us now) {
    ++incarnation_;
    term_ = d.term;
    voted_for_ = d.voted_for < 0 ? std::nullopt
                                 : std::optional<node_id>(node_id(d.voted_for));
    log_ = d.log;
    role_ = role::follower;
    known_leader_ = -1;
    commit_index_ = 0;
    last_applied_ = 0;
    round_lc_ = 0;
    seen_ = {};
    cstate_ = commit::commit_state(cfg_.n, self_);
    lead_.reset();
    votes_.clear();
    halted_ = false;
    outbox_.clear();
    start(now);
}

void raft_node::reset_election_deadline(time_us now) {
    time_us t = cfg_.election_timeout;
    election_deadline_ = now + time_us(timer_rng_.between(uint64_t(t), uint64_t(2 * t)));
}

time_us raft_node::next_wakeup() const {
    if (halted_) return -1;
    if (role_ == role::leader) return heartbeat_due_;
    return election_deadline_;
}

void raft_node::send(node_id to, message m) {
    if (halted_) return;
    outbox_.push_back(outbound{to, std::move(m)});
}

void raft_node::emit_state(time_us now) {
    if (!sink_) return;
    trace_record r;
    r.t = now;
    r.kind = trace_kind::state;
    r.node = self_;
    r.s = role_letter(role_);
    r.a = term_;
    sink_->on_record(r);
}

void raft_node::emit_cstate(time_us now) {
    if (!sink_) return;
    trace_record r;
    r.t = now;
    r.kind = trace_kind::cstate;
    r.node = self_;
    r.a = cstate_.max_commit;
    r.b = cstate_.next_commit;
    r.s = cstate_.bm.to_string();
    sink_->on_record(r);
}

void raft_node::emit_append(time_us now, index_t idx, const log_entry& e) {
    ++appended_total_;
    if (!sink_) return;
    trace_record r;
    r.t = now;
    r.kind = trace_kind::append;
    r.node = self_;
    r.a = idx;
    r.b = e.term;
    r.c = log_.term_at(idx - 1);  // prior entry's term, for log-matching checks
    r.s = cmd_label(e.command);
    sink_->on_record(r);
}

void raft_node::become_follower() {
    role_ = role::follower;
    lead_.reset();
    votes_.clear();
}

void raft_node::adopt_term(term_t t, time_us now) {
    assert(t > term_);
    term_ = t;
    voted_for_.reset();
    known_leader_ = -1;
    become_follower();
    round_lc_ = 0;
    seen_ = {};
    if (cfg_.var == variant::v2) {
        commit::reset_on_term_change(cstate_);
        emit_cstate(now);
    }
    emit_state(now);
    // A deposed leader's own election deadline is long stale; without a
    // fresh draw it would counter-campaign immediately and churn the term.
    reset_election_deadline(now);
}

void raft_node::start_election(time_us now) {
    term_ += 1;
    role_ = role::candidate;
    voted_for_ = self_;
    known_leader_ = -1;
    lead_.reset();
    votes_.clear();
    votes_.insert(self_);
    round_lc_ = 0;
    seen_ = {};
    if (cfg_.var == variant::v2) {
        commit::reset_on_term_change(cstate_);
        emit_cstate(now);
    }
    emit_state(now);
    request_vote_msg rv;
    rv.term = term_;
    rv.candidate_id = self_;
    rv.last_log_index = log_.last_index();
    rv.last_log_term = log_.last_term();
    for (node_id p = 0; p < cfg_.n; ++p)
        if (p != self_) send(p, rv);
    reset_election_deadline(now);
    if (int(votes_.size()) >= majority_of(cfg_.n)) become_leader(now);
}

void raft_node::become_leader(time_us now) {
    role_ = role::leader;
    known_leader_ = self_;
    lead_.emplace();
    lead_->next_index.assign(cfg_.n, log_.last_index() + 1);
    lead_->match_index.assign(cfg_.n, 0);
    lead_->last_repair.assign(cfg_.n, -1'000'000);
    lead_->send_next.assign(cfg_.n, log_.last_index() + 1);
    if (cfg_.var == variant::v2) {
        commit::reset_on_term_change(cstate_);
        emit_cstate(now);
    }
    emit_state(now);
    if (sink_) {
        trace_record r;
        r.t = now;
        r.kind = trace_kind::elected;
        r.node = self_;
        r.a = term_;
        sink_->on_record(r);
    }
    leader_broadcast(now);  // assert leadership immediately
}

void raft_node::on_timer(time_us now) {
    if (halted_) return;
    if (role_ == role::leader) {
        if (now >= heartbeat_due_) leader_broadcast(now);
    } else if (now >= election_deadline_) {
        start_election(now);
    }
}

void raft_node::handle(const envelope& env, time_us now) {
    if (halted_) return;
    if (std::holds_alternative<append_entries_msg>(env.payload)) {
        on_append_entries(env, now);
    } else if (std::holds_alternative<append_entries_reply>(env.payload)) {
        on_append_entries_reply(env, now);
    } else if (std::holds_alternative<request_vote_msg>(env.payload)) {
        on_request_vote(env, now);
    } else if (std::holds_alternative<request_vote_reply>(env.payload)) {
        on_vote_reply(env, now);
    } else if (std::holds_alternative<client_request>(env.payload)) {
        on_client_request(env, now);
    }
}

// --- replication paths -------------------------------------------------------

append_entries_msg raft_node::build_round_message() const {
    append_entries_msg m;
    m.term = term_;
    m.leader_id = self_;
    m.prev_log_index = commit_index_;
    m.prev_log_term = log_.term_at(commit_index_);
    m.entries = log_.slice(commit_index_, log_.last_index());
    m.leader_commit = commit_index_;
    m.is_gossip = true;
    m.round_lc = round_lc_;
    if (cfg_.var == variant::v2) m.commit = commit::attach_fields(cstate_);
    return m;
}

void raft_node::leader_start_round(time_us now) {
    (void)now;
    round_lc_ += 1;
    seen_.round_lc = round_lc_;  // own rounds are stale on re-receipt
    append_entries_msg m = build_round_message();
    for (node_id dst : gossip::round_targets(walker_)) send(dst, m);
}

// Entry-carrying sends to one follower are paced at one per two round
// periods; resending the whole suffix on every trigger would otherwise
// snowball once replies lag behind. Between paced sends an empty heartbeat
// keeps the follower's election timer fed.
void raft_node::send_append_to(node_id peer, time_us now, bool allow_heartbeat) {
    assert(lead_);
    index_t next = lead_->next_index[peer];
    bool has_entries = next <= log_.last_index();
    bool paced = now - lead_->last_repair[peer] >= 2 * cfg_.round_period;
    if (!has_entries || !paced) {
        if (!allow_heartbeat) return;
    } else {
        lead_->last_repair[peer] = now;
    }
    append_entries_msg m;
    m.term = term_;
    m.leader_id = self_;
    m.prev_log_index = next - 1;
    m.prev_log_term = log_.term_at(next - 1);
    if (has_entries && paced)
        m.entries = log_.slice(next - 1, log_.last_index());
    m.leader_commit = commit_index_;
    m.is_gossip = false;
    m.round_lc = round_lc_;
    if (cfg_.var == variant::v2) m.commit = commit::attach_fields(cstate_);
    send(peer, m);
}

void raft_node::send_heartbeat_to(node_id peer, time_us now) {
    (void)now;
    append_entries_msg m;
    m.term = term_;
    m.leader_id = self_;
    m.prev_log_index = lead_->next_index[peer] - 1;
    m.prev_log_term = log_.term_at(m.prev_log_index);
    m.leader_commit = commit_index_;
    m.is_gossip = false;
    m.round_lc = round_lc_;
    if (cfg_.var == variant::v2) m.commit = commit::attach_fields(cstate_);
    send(peer, m);
}

void raft_node::leader_broadcast(time_us now) {
    if (cfg_.var == variant::baseline) {
        for (node_id p = 0; p < cfg_.n; ++p) {
            if (p == self_) continue;
            index_t pending_from =
                std::max(lead_->next_index[p], lead_->send_next[p]);
            if (pending_from <= log_.last_index())
                send_append_to(p, now, true);  // paced entries or heartbeat
            else
                send_heartbeat_to(p, now);
        }
    } else {
        leader_start_round(now);
    }
    bool all_committed = commit_index_ == log_.last_index();
    heartbeat_due_ = now + (all_committed ? cfg_.idle_period : cfg_.round_period);
}

void raft_node::on_append_entries(const envelope& env, time_us now) {
    const auto& m = std::get<append_entries_msg>(env.payload);
    assert(validate_append_entries(m, cfg_.n, cfg_.var).empty());

    if (m.term < term_) {
        // Gossip from a stale term dies silently; RPCs get the term bump back.
        if (!m.is_gossip) {
            append_entries_reply rep;
            rep.term = term_;
            rep.success = false;
            rep.replier_id = self_;
            if (cfg_.var == variant::v2) rep.commit = commit::attach_fields(cstate_);
            send(m.leader_id, rep);
        }
        return;
    }
    if (m.term > term_) adopt_term(m.term, now);
    if (role_ == role::candidate) {
        become_follower();  // lost the election to this leader
        emit_state(now);
    }

    // Same-term commit fields merge from every copy, fresh or stale: the
    // union of differently-routed bitmaps is what lets majorities surface
    // away from the leader. Merge is idempotent, so duplicates are safe.
    auto absorb_commit_fields = [&]() -> bool {
        if (cfg_.var != variant::v2 || !m.commit) return false;
        bool changed = commit::absorb_fields(cstate_, *m.commit, log_, term_,
                                             majority_of(cfg_.n));
        if (changed) emit_cstate(now);
        index_t new_ci =
            commit::follower_commit_index(cstate_, log_, term_, commit_index_);
        if (new_ci > commit_index_) advance_commit(new_ci, now);
        return changed;
    };

    auto relay_with_fields = [&] {
        if (!cfg_.gossip_relay || halted_) return;
        append_entries_msg relay = m;  // term/entries/roundLC travel unmodified
        if (cfg_.var == variant::v2) relay.commit = commit::attach_fields(cstate_);
        for (node_id dst : gossip::round_targets(walker_)) send(dst, relay);
    };

    if (role_ == role::leader) {
        // Relayed copies of our own rounds: absorb the epidemic state and
        // pass advances along like any other participant.
        if (absorb_commit_fields() && m.is_gossip) relay_with_fields();
        return;
    }
    known_leader_ = m.leader_id;

    if (m.is_gossip && !gossip::is_fresh(seen_, m.round_lc)) {
        // Stale duplicate: no reply, no log delivery. It still relays once
        // more when its fields advanced our state, so bitmap unions spread
        // peer to peer at link speed instead of once per round.
        bool advanced = absorb_commit_fields();
        if (advanced && !halted_) relay_with_fields();
        return;
    }
    if (m.is_gossip) seen_.round_lc = m.round_lc;
    reset_election_deadline(now);  // fresh gossip or direct RPC acts as heartbeat

    bool ok = log_.has(m.prev_log_index) &&
              log_.term_at(m.prev_log_index) == m.prev_log_term;
    index_t match = 0;
    if (ok) {
        index_t idx = m.prev_log_index;
        for (const auto& e : m.entries) {
            ++idx;
            if (log_.has(idx)) {
                if (log_.term_at(idx) == e.term) continue;  // already replicated
                log_.truncate_from(idx);
                if (sink_) {
                    trace_record r;
                    r.t = now;
                    r.kind = trace_kind::truncate;
                    r.node = self_;
                    r.a = idx;
                    sink_->on_record(r);
                }
            }
            log_.append(e);
            emit_append(now, idx, e);
        }
        match = m.prev_log_index + index_t(m.entries.size());
        if (cfg_.var != variant::v2) {
            index_t new_ci = std::min(m.leader_commit, match);
            if (new_ci > commit_index_) advance_commit(new_ci, now);
            if (halted_) return;
        } else {
            if (commit::try_set_own_bit(cstate_, log_, term_)) emit_cstate(now);
        }
    }

    (void)absorb_commit_fields();
    if (halted_) return;

    append_entries_reply rep;
    rep.term = term_;
    rep.success = ok;
    rep.replier_id = self_;
    // On failure the hint carries our last index so the leader's repair can
    // jump straight to the end of a short log instead of probing one by one.
    rep.match_hint = ok ? match : log_.last_index();
    if (cfg_.var == variant::v2) rep.commit = commit::attach_fields(cstate_);
    send(m.leader_id, rep);

    if (m.is_gossip) relay_with_fields();
}

void raft_node::on_append_entries_reply(const envelope& env, time_us now) {
    const auto& r = std::get<append_entries_reply>(env.payload);
    if (r.term > term_) {
        adopt_term(r.term, now);
        return;
    }
    if (r.term < term_) return;

    if (cfg_.var == variant::v2 && r.commit) {
        if (commit::absorb_fields(cstate_, *r.commit, log_, term_,
                                  majority_of(cfg_.n)))
            emit_cstate(now);
        index_t new_ci =
            commit::follower_commit_index(cstate_, log_, term_, commit_index_);
        if (new_ci > commit_index_) advance_commit(new_ci, now);
        if (halted_) return;
    }

    if (role_ != role::leader) return;
    node_id peer = r.replier_id;
    if (peer >= cfg_.n || peer == self_) return;
    if (r.success) {
        lead_->match_index[peer] = std::max(lead_->match_index[peer], r.match_hint);
        lead_->next_index[peer] =
            std::max(lead_->next_index[peer], r.match_hint + 1);
        if (lead_->next_index[peer] == log_.last_index() + 1 &&
            lead_->send_next[peer] < lead_->next_index[peer])
            lead_->send_next[peer] = lead_->next_index[peer];  // back in sync
        if (cfg_.var != variant::v2) advance_commit_leader(now);
    } else {
        lead_->send_next[peer] = 0;  // stop streaming until repaired
        lead_->next_index[peer] = std::max<index_t>(
            1, std::min(lead_->next_index[peer] - 1, r.match_hint + 1));
        send_append_to(peer, now, false);  // paced point-to-point repair
    }
}

void raft_node::advance_commit_leader(time_us now) {
    assert(role_ == role::leader && cfg_.var != variant::v2);
    for (index_t n = log_.last_index(); n > commit_index_; --n) {
        if (log_.term_at(n) != term_) break;  // only current-term entries commit
        int count = 1;  // self
        for (node_id p = 0; p < cfg_.n; ++p)
            if (p != self_ && lead_->match_index[p] >= n) ++count;
        if (count >= majority_of(cfg_.n)) {
            advance_commit(n, now);
            break;
        }
    }
}

void raft_node::on_request_vote(const envelope& env, time_us now) {
    const auto& m = std::get<request_vote_msg>(env.payload);
    if (m.term > term_) adopt_term(m.term, now);
    request_vote_reply rep;
    rep.term = term_;
    if (m.term < term_) {
        rep.vote_granted = false;
    } else {
        bool up_to_date =
            m.last_log_term > log_.last_term() ||
            (m.last_log_term == log_.last_term() &&
             m.last_log_index >= log_.last_index());
        bool free_vote = !voted_for_ || *voted_for_ == m.candidate_id;
        rep.vote_granted = role_ != role::leader && up_to_date && free_vote;
        if (rep.vote_granted) {
            voted_for_ = m.candidate_id;
            reset_election_deadline(now);
        }
    }
    send(m.candidate_id, rep);
}

void raft_node::on_vote_reply(const envelope& env, time_us now) {
    const auto& r = std::get<request_vote_reply>(env.payload);
    if (r.term > term_) {
        adopt_term(r.term, now);
        return;
    }
    if (r.term < term_ || role_ != role::candidate || !r.vote_granted) return;
    votes_.insert(env.from);
    if (int(votes_.size()) >= majority_of(cfg_.n)) become_leader(now);
}

void raft_node::on_client_request(const envelope& env, time_us now) {
    const auto& q = std::get<client_request>(env.payload);
    client_response resp;
    resp.request_id = q.request_id;
    resp.attempt = q.attempt;
    if (role_ == role::leader) {
        index_t idx = log_.last_index() + 1;
        log_.append(log_entry{term_, q.command});
        emit_append(now, idx, log_.entry(idx));
        lead_->pending[idx] = pending_client{env.from, q.request_id, q.attempt};
        if (sink_) {
            trace_record tr;
            tr.t = now;
            tr.kind = trace_kind::client;
            tr.node = env.from;
            tr.s = "acc";
            tr.a = int64_t(q.request_id);
            tr.b = self_;
            tr.c = idx;
            sink_->on_record(tr);
        }
        if (cfg_.var == variant::v2) after_log_change(now);
        if (cfg_.var == variant::baseline && cfg_.baseline_immediate) {
            // Stream the fresh entry to followers that are in sync; paced
            // repairs catch the rest up.
            for (node_id p = 0; p < cfg_.n; ++p) {
                if (p == self_ || lead_->send_next[p] != idx) continue;
                append_entries_msg m;
                m.term = term_;
                m.leader_id = self_;
                m.prev_log_index = idx - 1;
                m.prev_log_term = log_.term_at(idx - 1);
                m.entries = {log_.entry(idx)};
                m.leader_commit = commit_index_;
                m.is_gossip = false;
                m.round_lc = round_lc_;
                send(p, m);
                lead_->send_next[p] = idx + 1;
            }
        }
        // Entries pending: the next broadcast must not sleep an idle period.
        if (heartbeat_due_ - now > cfg_.round_period)
            heartbeat_due_ = now + cfg_.round_period;
        return;  // response is emitted when the entry applies
    }
    if (known_leader_ >= 0) {
        resp.status = client_status::redirect;
        resp.leader_hint = known_leader_;
    } else {
        resp.status = client_status::unavailable;
    }
    send(env.from, resp);
}

void raft_node::after_log_change(time_us now) {
    bool changed = commit::try_set_own_bit(cstate_, log_, term_);
    while (commit::update(cstate_, log_, term_, majority_of(cfg_.n)))
        changed = true;
    if (changed) emit_cstate(now);
    index_t new_ci =
        commit::follower_commit_index(cstate_, log_, term_, commit_index_);
    if (new_ci > commit_index_) advance_commit(new_ci, now);
}

void raft_node::advance_commit(index_t new_ci, time_us now) {
    assert(new_ci > commit_index_ && new_ci <= log_.last_index());
    commit_index_ = new_ci;
    if (sink_) {
        trace_record r;
        r.t = now;
        r.kind = trace_kind::commit;
        r.node = self_;
        r.a = commit_index_;
        r.b = log_.term_at(commit_index_);
        sink_->on_record(r);
    }
    apply_committed(now);
}

void raft_node::apply_committed(time_us now) {
    while (last_applied_ < commit_index_) {
        index_t idx = last_applied_ + 1;
        const log_entry& e = log_.entry(idx);
        if (applier_ && !applier_(idx, e)) {
            halt(now);
            return;
        }
        last_applied_ = idx;
        if (sink_) {
            trace_record r;
            r.t = now;
            r.kind = trace_kind::apply;
            r.node = self_;
            r.a = idx;
            r.s = cmd_label(e.command);
            sink_->on_record(r);
        }
        if (role_ == role::leader) {
            auto it = lead_->pending.find(idx);
            if (it != lead_->pending.end()) {
                client_response resp;
                resp.request_id = it->second.request_id;
                resp.attempt = it->second.attempt;
                resp.status = client_status::ok;
                resp.leader_hint = self_;
                resp.index = idx;
                send(it->second.client, resp);
                lead_->pending.erase(it);
            }
        }
    }
}

void raft_node::halt(time_us now) {
    halted_ = true;
    outbox_.clear();
    if (sink_) {
        trace_record r;
        r.t = now;
        r.kind = trace_kind::fault;
        r.s = "halt node=" + std::to_string(self_);
        sink_->on_record(r);
    }
}

}  // namespace raftsim
