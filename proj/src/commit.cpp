#include "raftsim/commit.hpp"

#include <algorithm>
#include <cassert>

namespace raftsim::commit {

bool update(commit_state& cs, const replicated_log& log, term_t current_term,
            int majority) {
    if (cs.bm.ones() < majority) return false;
    cs.max_commit = cs.next_commit;
    cs.bm.clear();
    if (cs.next_commit >= log.last_index() || log.last_term() != current_term) {
        cs.next_commit += 1;
    } else {
        cs.next_commit = log.last_index();
        cs.bm.set(cs.self);
    }
    assert(cs.next_commit > cs.max_commit);
    return true;
}

bool merge(commit_state& cs, const bitmap& bm_in, index_t max_commit_in,
           index_t next_commit_in) {
    commit_state before = cs;
    cs.max_commit = std::max(cs.max_commit, max_commit_in);
    if (cs.next_commit <= next_commit_in) cs.bm.or_with(bm_in);
    if (cs.next_commit <= cs.max_commit) {
        cs.bm = bm_in;
        cs.next_commit = next_commit_in;
    }
    assert(cs.next_commit > cs.max_commit);
    return !(cs == before);
}

bool try_set_own_bit(commit_state& cs, const replicated_log& log,
                     term_t current_term) {
    if (cs.bm.test(cs.self)) return false;
    if (log.last_index() >= cs.next_commit && log.last_term() == current_term) {
        cs.bm.set(cs.self);
        return true;
    }
    return false;
}

index_t follower_commit_index(const commit_state& cs, const replicated_log& log,
                              term_t current_term, index_t current_commit) {
    if (log.last_term() != current_term) return current_commit;
    return std::max(current_commit, std::min(log.last_index(), cs.max_commit));
}

void reset_on_term_change(commit_state& cs) {
    cs.bm.clear();
    cs.next_commit = cs.max_commit + 1;
}

commit_fields attach_fields(const commit_state& cs) {
    return commit_fields{cs.bm, cs.max_commit, cs.next_commit};
}

bool absorb_fields(commit_state& cs, const commit_fields& in,
                   const replicated_log& log, term_t current_term,
                   int majority) {
    bool changed = merge(cs, in.bm, in.max_commit, in.next_commit);
    changed |= try_set_own_bit(cs, log, current_term);
    // A single merge can reveal several successive majorities.
    while (update(cs, log, current_term, majority)) changed = true;
    return changed;
}

}  // namespace raftsim::commit
