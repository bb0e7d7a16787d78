#pragma once
#include <map>
#include <set>
#include <string>
#include <vector>

#include "raftsim/trace.hpp"
#include "raftsim/types.hpp"

namespace raftsim {

struct violation {
    // a: election safety       b: log matching
    // c: state machine safety  d: commit safety
    // e: monotonicity          f: nextCommit > maxCommit
    // g: leader completeness   p: malformed trace
    char code;
    time_us t;
    std::string detail;
};

struct check_verdict {
    std::vector<violation> violations;
    bool pass() const { return violations.empty(); }
    std::string to_string() const;  // machine-readable, one line per violation
};

// Offline streaming verifier over a trace. Feed records in order, then call
// finish(). Commit safety is evaluated against trace-time log contents, so
// transient violations are caught.
class safety_checker final : public trace_sink {
public:
    explicit safety_checker(uint32_t n);

    void on_record(const trace_record& r) override;
    check_verdict finish();

private:
    struct node_view {
        term_t term = 0;
        index_t ci = 0;
        index_t mc = 0;
        index_t nc = 1;
        index_t next_apply = 1;
        std::vector<term_t> log_terms{0};  // sentinel at 0
        bool crashed = false;
        bool seen_cstate = false;
    };

    void add(char code, time_us t, std::string detail);
    void check_commit_range(int64_t node, index_t from_excl, index_t to_incl,
                            time_us t, bool is_max_commit);

    uint32_t n_;
    int majority_;
    std::vector<node_view> nodes_;
    std::map<term_t, std::set<int64_t>> leaders_per_term_;
    // (index, term) -> (command label, previous entry's term); global
    // uniqueness gives the log matching property inductively.
    std::map<std::pair<index_t, term_t>, std::pair<std::string, term_t>> entries_;
    // index -> term -> nodes that ever held it (never erased: commit safety is
    // judged against earlier-or-equal trace times).
    std::map<index_t, std::map<term_t, std::set<int64_t>>> held_;
    std::map<index_t, std::string> applied_;  // index -> command label
    std::vector<violation> violations_;
    time_us last_t_ = 0;
};

// Convenience: run the checker over a buffered trace.
check_verdict check_trace(const std::vector<trace_record>& records, uint32_t n);

// Parses a trace file and checks it. Malformed lines produce a 'p' violation
// with the line number and the checking stops there.
check_verdict check_trace_file(const std::string& path, std::string* err);

// --- Independent reference for the commit agreement functions ---------------
//
// A direct transliteration of the printed Update/Merge pseudocode, sharing no
// code with the engine implementation. Used to cross-check the engine over
// randomized event scripts on small instances (n <= 5).

struct oracle_commit_state {
    std::vector<uint8_t> bits;
    int64_t max_commit = 0;
    int64_t next_commit = 1;
};

struct commit_script_event {
    enum class op { merge, append, set_bit, update, reset, absorb } k;
    std::vector<uint8_t> bm;   // merge/absorb payload
    int64_t mc = 0, nc = 0;    // merge/absorb payload
    int64_t term = 0;          // append payload
};

class commit_oracle {
public:
    commit_oracle(uint32_t n, uint32_t self);

    void apply(const commit_script_event& ev);

    const oracle_commit_state& state() const { return st_; }
    const std::vector<int64_t>& log_terms() const { return log_terms_; }
    int64_t current_term() const { return current_term_; }

private:
    void do_update();
    void do_merge(const std::vector<uint8_t>& bm, int64_t mc, int64_t nc);
    void do_set_bit();

    uint32_t n_, self_;
    int64_t current_term_ = 1;
    std::vector<int64_t> log_terms_{0};  // sentinel
    oracle_commit_state st_;
};

}  // namespace raftsim
