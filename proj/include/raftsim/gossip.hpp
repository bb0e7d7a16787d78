#pragma once
#include <vector>

#include "raftsim/messages.hpp"
#include "raftsim/rng.hpp"
#include "raftsim/types.hpp"

namespace raftsim::gossip {

// Circular walk over a random permutation of the other n-1 process ids,
// F destinations per round. The cursor only grows, so consecutive rounds
// keep sweeping the permutation instead of re-targeting the same prefix.
struct permutation_walker {
    std::vector<node_id> order;  // permutation of peers (all ids except self)
    uint64_t cursor = 0;
    uint32_t fanout = 1;
};

// n >= 2; the permutation is drawn uniformly from the seeded generator.
permutation_walker new_walker(uint32_t n, node_id self, uint32_t fanout, rng& r);

// One round: the next F peers along the circular walk. Destinations within a
// round are distinct when F <= n-1.
std::vector<node_id> round_targets(permutation_walker& w);

// Highest round observed in the current term; reset to zero on term change.
struct gossip_seen {
    uint64_t round_lc = 0;
};

// First-receipt classification for a gossip AppendEntries already known to be
// from the current term (term adoption happens before this check).
inline bool is_fresh(const gossip_seen& seen, uint64_t msg_round_lc) {
    return msg_round_lc > seen.round_lc;
}

}  // namespace raftsim::gossip
