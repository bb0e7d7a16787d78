#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

namespace raftsim {

// Deterministic RNG used everywhere in the simulator. We avoid
// std::uniform_*_distribution because its output is implementation-defined;
// trace byte-equality across rebuilds depends on this exact sequence.
class rng {
public:
    explicit rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    uint64_t next() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased bounded draw in [0, n).
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
        uint64_t v;
        do { v = next(); } while (v >= limit);
        return v % n;
    }

    // In [lo, hi] inclusive.
    uint64_t between(uint64_t lo, uint64_t hi) { return lo + below(hi - lo + 1); }

    double unit() {  // [0,1)
        return double(next() >> 11) * (1.0 / 9007199254740992.0);
    }

    // Triangular distribution sample via inverse CDF.
    double triangular(double min, double mode, double max) {
        double u = unit();
        if (max <= min) return min;
        double fc = (mode - min) / (max - min);
        if (u < fc) return min + std::sqrt(u * (max - min) * (mode - min));
        return max - std::sqrt((1.0 - u) * (max - min) * (max - mode));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent child stream.
    rng fork(uint64_t tag) {
        rng r(state_ ^ (tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        r.next();
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace raftsim
