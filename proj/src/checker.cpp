#include "raftsim/checker.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace raftsim {

std::string check_verdict::to_string() const {
    if (violations.empty()) return "PASS\n";
    std::string s;
    for (const auto& v : violations) {
        const char* code_name = "?";
        switch (v.code) {
            case 'a': code_name = "ELECTION_SAFETY"; break;
            case 'b': code_name = "LOG_MATCHING"; break;
            case 'c': code_name = "STATE_MACHINE_SAFETY"; break;
            case 'd': code_name = "COMMIT_SAFETY"; break;
            case 'e': code_name = "MONOTONICITY"; break;
            case 'f': code_name = "COMMIT_STATE_ORDER"; break;
            case 'g': code_name = "LEADER_COMPLETENESS"; break;
            case 'p': code_name = "MALFORMED_TRACE"; break;
        }
        char buf[64];
        snprintf(buf, sizeof buf, "VIOLATION %s t=%lld ", code_name,
                 (long long)v.t);
        s += buf;
        s += v.detail;
        s += '\n';
    }
    s += "FAIL " + std::to_string(violations.size()) + " violations\n";
    return s;
}

safety_checker::safety_checker(uint32_t n)
    : n_(n), majority_(majority_of(n)), nodes_(n) {}

void safety_checker::add(char code, time_us t, std::string detail) {
    if (violations_.size() < 200)
        violations_.push_back(violation{code, t, std::move(detail)});
}

void safety_checker::check_commit_range(int64_t node, index_t from_excl,
                                        index_t to_incl, time_us t,
                                        bool is_max_commit) {
    auto& nv = nodes_[size_t(node)];
    for (index_t k = from_excl + 1; k <= to_incl; ++k) {
        auto hit = held_.find(k);
        bool ok = false;
        if (hit != held_.end()) {
            if (!is_max_commit && k < index_t(nv.log_terms.size())) {
                // The deciding term is known: this node's own entry at k.
                auto ts = hit->second.find(nv.log_terms[size_t(k)]);
                ok = ts != hit->second.end() && int(ts->second.size()) >= majority_;
            } else {
                for (const auto& [term, holders] : hit->second)
                    if (int(holders.size()) >= majority_) { ok = true; break; }
            }
        }
        if (!ok)
            add('d', t,
                (is_max_commit ? "maxCommit=" : "commitIndex=") +
                    std::to_string(k) + " at node " + std::to_string(node) +
                    " without majority replication");
    }
}

void safety_checker::on_record(const trace_record& r) {
    if (r.t < last_t_) {
        add('p', r.t, "time went backwards");
        return;
    }
    last_t_ = r.t;

    switch (r.kind) {
        case trace_kind::state: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& nv = nodes_[size_t(r.node)];
            if (r.a < nv.term)
                add('e', r.t, "term regressed at node " + std::to_string(r.node));
            nv.term = r.a;
            break;
        }
        case trace_kind::elected: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& winners = leaders_per_term_[r.a];
            winners.insert(r.node);
            if (winners.size() > 1)
                add('a', r.t,
                    "two leaders in term " + std::to_string(r.a));

            // Leader completeness: log must cover every index some majority
            // currently agrees is majority-replicated (their maxCommit).
            std::vector<index_t> mcs;
            for (const auto& nv : nodes_)
                mcs.push_back(nv.crashed ? 0 : nv.mc);
            std::sort(mcs.begin(), mcs.end(), std::greater<index_t>());
            index_t threshold = mcs[size_t(majority_ - 1)];
            const auto& lead = nodes_[size_t(r.node)];
            if (index_t(lead.log_terms.size()) - 1 < threshold)
                add('g', r.t,
                    "leader " + std::to_string(r.node) + " log ends at " +
                        std::to_string(lead.log_terms.size() - 1) +
                        " below majority maxCommit " + std::to_string(threshold));
            break;
        }
        case trace_kind::append: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& nv = nodes_[size_t(r.node)];
            if (r.a != index_t(nv.log_terms.size())) {
                add('p', r.t,
                    "append gap at node " + std::to_string(r.node) + " idx " +
                        std::to_string(r.a));
                break;
            }
            // Log matching: (index, term) determines the command and the
            // previous term; equal pairs imply equal prefixes inductively.
            auto key = std::make_pair(index_t(r.a), term_t(r.b));
            auto val = std::make_pair(r.s, term_t(r.c));
            auto [it, inserted] = entries_.emplace(key, val);
            if (!inserted && it->second != val)
                add('b', r.t,
                    "conflicting entry (" + std::to_string(r.a) + ",t" +
                        std::to_string(r.b) + ") at node " +
                        std::to_string(r.node));
            if (nv.log_terms.back() != term_t(r.c))
                add('b', r.t,
                    "append prevterm mismatch at node " + std::to_string(r.node));
            nv.log_terms.push_back(r.b);
            held_[r.a][r.b].insert(r.node);
            break;
        }
        case trace_kind::truncate: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& nv = nodes_[size_t(r.node)];
            if (r.a < 1 || r.a >= index_t(nv.log_terms.size())) {
                add('p', r.t, "truncate out of range at node " +
                                  std::to_string(r.node));
                break;
            }
            if (r.a <= nv.ci)
                add('d', r.t,
                    "truncate below commitIndex at node " + std::to_string(r.node));
            nv.log_terms.resize(size_t(r.a));
            break;
        }
        case trace_kind::commit: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& nv = nodes_[size_t(r.node)];
            if (r.a < nv.ci) {
                add('e', r.t,
                    "commitIndex regressed at node " + std::to_string(r.node));
                break;
            }
            if (r.a >= index_t(nv.log_terms.size())) {
                add('p', r.t,
                    "commit beyond log end at node " + std::to_string(r.node));
                break;
            }
            if (nv.log_terms[size_t(r.a)] != term_t(r.b))
                add('p', r.t, "commit term mismatch at node " +
                                  std::to_string(r.node));
            check_commit_range(r.node, nv.ci, r.a, r.t, false);
            nv.ci = r.a;
            break;
        }
        case trace_kind::cstate: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& nv = nodes_[size_t(r.node)];
            if (r.b <= r.a)
                add('f', r.t,
                    "nextCommit " + std::to_string(r.b) + " <= maxCommit " +
                        std::to_string(r.a) + " at node " + std::to_string(r.node));
            if (r.s.size() != n_)
                add('p', r.t, "bitmap length " + std::to_string(r.s.size()));
            if (nv.seen_cstate && r.a < nv.mc)
                add('e', r.t,
                    "maxCommit regressed at node " + std::to_string(r.node));
            if (r.a > nv.mc)
                check_commit_range(r.node, nv.mc, r.a, r.t, true);
            nv.mc = r.a;
            nv.nc = r.b;
            nv.seen_cstate = true;
            break;
        }
        case trace_kind::apply: {
            if (r.node < 0 || r.node >= int64_t(n_)) break;
            auto& nv = nodes_[size_t(r.node)];
            if (r.a != nv.next_apply)
                add('c', r.t,
                    "out-of-order apply at node " + std::to_string(r.node) +
                        " idx " + std::to_string(r.a));
            if (r.a > nv.ci)
                add('c', r.t,
                    "apply beyond commitIndex at node " + std::to_string(r.node));
            auto [it, inserted] = applied_.emplace(r.a, r.s);
            if (!inserted && it->second != r.s)
                add('c', r.t,
                    "divergent command applied at index " + std::to_string(r.a));
            nv.next_apply = r.a + 1;
            break;
        }
        case trace_kind::fault: {
            // crash/recover reset the volatile per-incarnation baselines
            auto parse_node = [&](const char* prefix) -> int64_t {
                size_t p = r.s.find(prefix);
                if (p == std::string::npos) return -1;
                return atoll(r.s.c_str() + p + strlen(prefix));
            };
            if (r.s.rfind("crash ", 0) == 0 || r.s.rfind("halt ", 0) == 0) {
                int64_t id = parse_node("node=");
                if (id >= 0 && id < int64_t(n_)) {
                    nodes_[size_t(id)].crashed = true;
                    nodes_[size_t(id)].mc = 0;  // volatile
                }
            } else if (r.s.rfind("recover ", 0) == 0) {
                int64_t id = parse_node("node=");
                if (id >= 0 && id < int64_t(n_)) {
                    auto& nv = nodes_[size_t(id)];
                    nv.crashed = false;
                    nv.ci = 0;
                    nv.mc = 0;
                    nv.nc = 1;
                    nv.next_apply = 1;
                    nv.seen_cstate = false;
                }
            }
            break;
        }
        default:
            break;
    }
}

check_verdict safety_checker::finish() {
    check_verdict v;
    v.violations = violations_;
    return v;
}

check_verdict check_trace(const std::vector<trace_record>& records, uint32_t n) {
    safety_checker ck(n);
    for (const auto& r : records) ck.on_record(r);
    return ck.finish();
}

check_verdict check_trace_file(const std::string& path, std::string* err) {
    check_verdict bad;
    std::ifstream in(path);
    if (!in.is_open()) {
        if (err) *err = "cannot open " + path;
        bad.violations.push_back(violation{'p', 0, "cannot open " + path});
        return bad;
    }
    std::string line;
    uint32_t n = 0;
    size_t line_no = 0;
    // header: "# raftsim-trace v1" then "# n=<n> variant=..."
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("# n=", 0) == 0) {
            n = uint32_t(atoi(line.c_str() + 4));
            break;
        }
        if (line_no > 2) break;
    }
    if (n == 0) {
        if (err) *err = "missing trace header with cluster size";
        bad.violations.push_back(violation{'p', 0, "missing n= header"});
        return bad;
    }
    safety_checker ck(n);
    while (std::getline(in, line)) {
        ++line_no;
        trace_record r;
        std::string perr;
        if (!parse_record(line, r, &perr)) {
            if (perr.empty()) continue;  // comment
            bad.violations.push_back(violation{
                'p', 0, "line " + std::to_string(line_no) + ": " + perr});
            return bad;
        }
        ck.on_record(r);
    }
    return ck.finish();
}

// --- reference implementation of the printed pseudocode ----------------------

commit_oracle::commit_oracle(uint32_t n, uint32_t self) : n_(n), self_(self) {
    st_.bits.assign(n, 0);
}

void commit_oracle::do_update() {
    int ones = 0;
    for (uint8_t b : st_.bits) ones += b;
    if (ones >= int(n_ / 2 + 1)) {
        st_.max_commit = st_.next_commit;
        for (auto& b : st_.bits) b = 0;
        int64_t last = int64_t(log_terms_.size()) - 1;
        if (st_.next_commit >= last || log_terms_.back() != current_term_) {
            st_.next_commit = st_.next_commit + 1;
        } else {
            st_.next_commit = last;
            st_.bits[self_] = 1;
        }
    }
}

void commit_oracle::do_merge(const std::vector<uint8_t>& bm, int64_t mc,
                             int64_t nc) {
    st_.max_commit = std::max(st_.max_commit, mc);
    if (st_.next_commit <= nc)
        for (uint32_t i = 0; i < n_; ++i) st_.bits[i] |= bm[i];
    if (st_.next_commit <= st_.max_commit) {
        st_.bits = bm;
        st_.next_commit = nc;
    }
}

void commit_oracle::do_set_bit() {
    int64_t last = int64_t(log_terms_.size()) - 1;
    if (last >= st_.next_commit && log_terms_.back() == current_term_)
        st_.bits[self_] = 1;
}

void commit_oracle::apply(const commit_script_event& ev) {
    switch (ev.k) {
        case commit_script_event::op::merge:
            do_merge(ev.bm, ev.mc, ev.nc);
            return;
        case commit_script_event::op::append:
            log_terms_.push_back(ev.term);
            do_set_bit();
            return;
        case commit_script_event::op::set_bit:
            do_set_bit();
            return;
        case commit_script_event::op::update:
            do_update();
            return;
        case commit_script_event::op::reset:
            current_term_ += 1;
            for (auto& b : st_.bits) b = 0;
            st_.next_commit = st_.max_commit + 1;
            return;
        case commit_script_event::op::absorb: {
            do_merge(ev.bm, ev.mc, ev.nc);
            do_set_bit();
            oracle_commit_state prev;
            do {
                prev = st_;
                do_update();
            } while (!(prev.bits == st_.bits && prev.max_commit == st_.max_commit &&
                       prev.next_commit == st_.next_commit));
            return;
        }
    }
}

}  // namespace raftsim
