#pragma once
#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

namespace raftsim {

using node_id = uint32_t;   // process id, 0..n-1
using term_t = int64_t;     // logical epoch, monotone per process
using index_t = int64_t;    // log index, 1-based; 0 is the sentinel
using time_us = int64_t;    // simulated time in microseconds

enum class variant { baseline, v1, v2 };

const char* variant_name(variant v);
bool parse_variant(const std::string& s, variant& out);

enum class role { follower, candidate, leader };
const char* role_letter(role r);  // "F" / "C" / "L"

struct log_entry {
    term_t term = 0;
    std::string command;  // opaque client bytes

    bool operator==(const log_entry&) const = default;
};

// 1-indexed log with a (term 0, empty) sentinel at index 0. Terms along the
// sequence are nondecreasing.
class replicated_log {
public:
    replicated_log() : entries_(1) {}

    index_t last_index() const { return index_t(entries_.size()) - 1; }
    term_t last_term() const { return entries_.back().term; }

    bool has(index_t i) const { return i >= 0 && i <= last_index(); }
    term_t term_at(index_t i) const {
        assert(has(i));
        return entries_[size_t(i)].term;
    }
    const log_entry& entry(index_t i) const {
        assert(i >= 1 && has(i));
        return entries_[size_t(i)];
    }

    void append(log_entry e) {
        assert(e.term >= last_term());
        entries_.push_back(std::move(e));
    }

    // Drops entries at indices >= i. The sentinel is never dropped.
    void truncate_from(index_t i) {
        assert(i >= 1);
        if (i <= last_index()) entries_.resize(size_t(i));
    }

    // Entries in (from, to], term-ordered slice for outbound messages.
    std::vector<log_entry> slice(index_t from, index_t to) const {
        std::vector<log_entry> out;
        for (index_t i = from + 1; i <= to && i <= last_index(); ++i)
            out.push_back(entries_[size_t(i)]);
        return out;
    }

    bool operator==(const replicated_log&) const = default;

private:
    std::vector<log_entry> entries_;
};

// n-bit vote record; bit i may be set to one only by process i.
class bitmap {
public:
    bitmap() = default;
    explicit bitmap(uint32_t n) : bits_(n, 0) {}

    uint32_t size() const { return uint32_t(bits_.size()); }
    bool test(uint32_t i) const { return bits_[i] != 0; }
    void set(uint32_t i) { bits_[i] = 1; }
    void clear() { bits_.assign(bits_.size(), 0); }

    int ones() const {
        int c = 0;
        for (auto b : bits_) c += b;
        return c;
    }

    void or_with(const bitmap& other) {
        assert(other.size() == size());
        for (size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
    }

    std::string to_string() const {
        std::string s(bits_.size(), '0');
        for (size_t i = 0; i < bits_.size(); ++i)
            if (bits_[i]) s[i] = '1';
        return s;
    }

    static bool from_string(const std::string& s, bitmap& out) {
        bitmap b(uint32_t(s.size()));
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') b.bits_[i] = 1;
            else if (s[i] != '0') return false;
        }
        out = std::move(b);
        return true;
    }

    bool operator==(const bitmap&) const = default;

private:
    std::vector<uint8_t> bits_;
};

inline int majority_of(uint32_t n) { return int(n / 2) + 1; }

}  // namespace raftsim
