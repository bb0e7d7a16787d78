#pragma once
#include "raftsim/messages.hpp"
#include "raftsim/types.hpp"

namespace raftsim::commit {

// Per-node decentralized commit state. At rest (outside update/merge bodies)
// next_commit > max_commit always holds; a node only ever sets its own bit.
struct commit_state {
    bitmap bm;
    index_t max_commit = 0;
    index_t next_commit = 1;
    node_id self = 0;

    explicit commit_state(uint32_t n = 0, node_id self_id = 0)
        : bm(n), self(self_id) {}

    bool operator==(const commit_state&) const = default;
};

// Advances max_commit when the bitmap shows a majority, then repositions
// next_commit against the local log. Returns true if anything changed.
bool update(commit_state& cs, const replicated_log& log, term_t current_term,
            int majority);

// Combines received (bitmap', maxCommit', nextCommit') into local state.
// Returns true if anything changed.
bool merge(commit_state& cs, const bitmap& bm_in, index_t max_commit_in,
           index_t next_commit_in);

// Sets the node's own bit when the log holds the entry at next_commit and the
// last entry is from the current term. Never clears a bit.
bool try_set_own_bit(commit_state& cs, const replicated_log& log,
                     term_t current_term);

// New commit index: min(last index, max_commit) when the last entry is from
// the current term; monotone over the passed-in current value.
index_t follower_commit_index(const commit_state& cs, const replicated_log& log,
                              term_t current_term, index_t current_commit);

// Election started locally or a newer term discovered: zero the bitmap and
// restart voting just past max_commit.
void reset_on_term_change(commit_state& cs);

// Copies current values into an outbound AppendEntries/reply.
commit_fields attach_fields(const commit_state& cs);

// Receive pipeline: merge, then try_set_own_bit, then update to a fixed
// point. Call follower_commit_index afterwards for the commit index.
// Returns true if any step changed the state.
bool absorb_fields(commit_state& cs, const commit_fields& in,
                   const replicated_log& log, term_t current_term, int majority);

}  // namespace raftsim::commit
