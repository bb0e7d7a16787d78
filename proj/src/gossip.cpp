#include "raftsim/gossip.hpp"

#include <cassert>

namespace raftsim::gossip {

permutation_walker new_walker(uint32_t n, node_id self, uint32_t fanout, rng& r) {
    assert(n >= 2 && self < n);
    permutation_walker w;
    w.order.reserve(n - 1);
    for (node_id i = 0; i < n; ++i)
        if (i != self) w.order.push_back(i);
    r.shuffle(w.order);
    w.fanout = fanout < 1 ? 1 : fanout;
    return w;
}

std::vector<node_id> round_targets(permutation_walker& w) {
    std::vector<node_id> out;
    const uint64_t len = w.order.size();
    if (len == 0) return out;
    uint32_t f = w.fanout;
    out.reserve(f);
    for (uint32_t i = 0; i < f; ++i)
        out.push_back(w.order[(w.cursor + i) % len]);
    w.cursor += f;
    return out;
}

}  // namespace raftsim::gossip
