#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "raftsim/types.hpp"

namespace raftsim {

// Per-link delay model: triangular(min, mode, max), milliseconds.
struct latency_spec {
    double min_ms = 1.0;
    double mode_ms = 2.0;
    double max_ms = 5.0;

    double mean_ms() const { return (min_ms + mode_ms + max_ms) / 3.0; }
};

// Connectivity need not be symmetric or transitive.
class topology {
public:
    topology() = default;
    explicit topology(uint32_t n, double loss_prob = 0.0)
        : n_(n), reachable_(size_t(n) * n, 1), loss_(size_t(n) * n, loss_prob) {}

    uint32_t n() const { return n_; }

    bool reachable(node_id i, node_id j) const {
        if (i == j) return true;
        return reachable_[size_t(i) * n_ + j] != 0;
    }
    void set_reachable(node_id i, node_id j, bool v) {
        reachable_[size_t(i) * n_ + j] = v ? 1 : 0;
    }

    double loss(node_id i, node_id j) const { return loss_[size_t(i) * n_ + j]; }
    void set_loss(node_id i, node_id j, double p) {
        loss_[size_t(i) * n_ + j] = p;
    }
    void set_loss_all(double p) { loss_.assign(loss_.size(), p); }

    latency_spec latency;

private:
    uint32_t n_ = 0;
    std::vector<uint8_t> reachable_;
    std::vector<double> loss_;
};

struct fault_action {
    enum class kind { crash, recover, crash_leader, partition, heal, set_loss };

    time_us t = 0;
    kind k = kind::crash;
    int32_t node = -1;                         // crash/recover
    time_us down_us = 0;                       // crash_leader auto-recover delay
    int32_t from = -1, to = -1;                // set_loss link
    double p = 0.0;                            // set_loss probability
    std::vector<std::vector<uint32_t>> groups; // partition
};

std::string describe_fault(const fault_action& f);

}  // namespace raftsim
