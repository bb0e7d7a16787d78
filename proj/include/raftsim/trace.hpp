#pragma once
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "raftsim/messages.hpp"
#include "raftsim/types.hpp"

namespace raftsim {

enum class trace_kind {
    send, recv, state, elected, append, truncate, commit, cstate, apply,
    fault, client, cost, end
};

enum class send_outcome { ok, lost, unreachable, down };

// Flat record; field use depends on kind (see trace.cpp for the line grammar).
struct trace_record {
    time_us t = 0;
    trace_kind kind = trace_kind::end;
    int64_t node = -1;   // owning/receiving node (or client id for `client`)
    int64_t peer = -1;   // from/to counterpart
    msg_kind mk = msg_kind::ae;
    send_outcome outcome = send_outcome::ok;
    int64_t a = 0, b = 0, c = 0;  // kind-specific integers
    double units = 0.0;           // cost records
    std::string s;                // summary / bitmap / cmd label / fault desc / client event
};

class trace_sink {
public:
    virtual ~trace_sink() = default;
    virtual void on_record(const trace_record& r) = 0;
};

class null_sink final : public trace_sink {
public:
    void on_record(const trace_record&) override {}
};

class fanout_sink final : public trace_sink {
public:
    void add(trace_sink* s) { if (s) sinks_.push_back(s); }
    void on_record(const trace_record& r) override {
        for (auto* s : sinks_) s->on_record(r);
    }

private:
    std::vector<trace_sink*> sinks_;
};

// Renders one record as its canonical trace line (without newline).
std::string format_record(const trace_record& r);

// Parses a canonical trace line. Returns false with *err set on malformed
// input; comment/header lines ("#...") return false with empty *err.
bool parse_record(const std::string& line, trace_record& out, std::string* err);

// Line-delimited file writer with the schema version header.
class trace_file_writer final : public trace_sink {
public:
    trace_file_writer(const std::string& path, uint32_t n, variant v, uint64_t seed);
    void on_record(const trace_record& r) override;
    void close();
    bool ok() const { return ok_; }

private:
    std::ofstream out_;
    bool ok_ = false;
};

// Keeps every record in memory (tests, in-process checking).
class trace_buffer final : public trace_sink {
public:
    void on_record(const trace_record& r) override { records.push_back(r); }
    std::vector<trace_record> records;
};

// FNV-1a over the formatted lines; cheap determinism fingerprint.
class trace_hasher final : public trace_sink {
public:
    void on_record(const trace_record& r) override;
    uint64_t digest() const { return h_; }

private:
    uint64_t h_ = 1469598103934665603ULL;
};

uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 1469598103934665603ULL);
std::string cmd_label(const std::string& command);  // 16-hex digest of bytes

}  // namespace raftsim
