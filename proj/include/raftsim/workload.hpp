#pragma once
#include <string>
#include <vector>

#include "raftsim/sim.hpp"

namespace raftsim {

struct client_config {
    uint32_t m = 10;                 // concurrent closed-loop clients
    double rate_rps = 0.0;           // aggregate target; 0 = unpaced
    uint32_t command_size = 64;      // request payload bytes
    int retry_budget = 25;           // attempts per logical request
    time_us request_timeout = 400'000;
    time_us stop_after = 0;          // no new requests past this time; 0 = never
};

// Closed-loop client pool: each client keeps at most one outstanding request,
// following redirects and retrying on timeout until the budget runs out.
// Load starts once the first leader is elected.
class client_pool final : public sim_actor {
public:
    client_pool(const client_config& cfg, uint32_t n, simulation& sim);

    void deliver(simulation& sim, const envelope& env, time_us now) override;
    void timer(simulation& sim, uint64_t tag, time_us now) override;

    int64_t completed() const { return completed_; }
    int64_t failed() const { return failed_; }
    time_us load_start() const { return load_start_; }

private:
    struct client {
        uint64_t request_id = 0;  // active logical request
        uint32_t attempt = 0;
        time_us arrival = 0;      // first send of the active request
        int64_t target = -1;
        int64_t believed_leader = -1;  // cached between requests
        bool busy = false;
        time_us earliest_next = 0;  // rate pacing
    };

    void start_request(simulation& sim, uint32_t c, time_us now);
    void send_attempt(simulation& sim, uint32_t c, time_us now);
    void finish_request(simulation& sim, uint32_t c, time_us now, bool ok);
    node_id client_addr(uint32_t c) const { return n_ + c; }
    void emit(simulation& sim, time_us t, uint32_t c, const char* ev, int64_t a,
              int64_t b, int64_t cc);

    client_config cfg_;
    uint32_t n_;
    std::vector<client> clients_;
    uint64_t next_request_id_ = 1;
    int64_t completed_ = 0;
    int64_t failed_ = 0;
    time_us load_start_ = -1;
    time_us pacing_interval_ = 0;
};

}  // namespace raftsim
