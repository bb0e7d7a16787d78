#include "raftsim/trace.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>

namespace raftsim {

uint64_t fnv1a(const void* data, size_t len, uint64_t seed) {
    uint64_t h = seed;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string cmd_label(const std::string& command) {
    char buf[20];
    snprintf(buf, sizeof buf, "%016llx",
             (unsigned long long)fnv1a(command.data(), command.size()));
    return buf;
}

namespace {

const char* outcome_name(send_outcome o) {
    switch (o) {
        case send_outcome::ok: return "ok";
        case send_outcome::lost: return "lost";
        case send_outcome::unreachable: return "unreachable";
        case send_outcome::down: return "down";
    }
    return "?";
}

bool parse_outcome(const std::string& s, send_outcome& o) {
    if (s == "ok") { o = send_outcome::ok; return true; }
    if (s == "lost") { o = send_outcome::lost; return true; }
    if (s == "unreachable") { o = send_outcome::unreachable; return true; }
    if (s == "down") { o = send_outcome::down; return true; }
    return false;
}

bool parse_mk(const std::string& s, msg_kind& k) {
    if (s == "AE") { k = msg_kind::ae; return true; }
    if (s == "AER") { k = msg_kind::ae_reply; return true; }
    if (s == "RV") { k = msg_kind::vote; return true; }
    if (s == "RVR") { k = msg_kind::vote_reply; return true; }
    if (s == "CRQ") { k = msg_kind::client_req; return true; }
    if (s == "CRP") { k = msg_kind::client_resp; return true; }
    return false;
}

}  // namespace

std::string format_record(const trace_record& r) {
    char buf[256];
    std::string s;
    auto t = (long long)r.t;
    switch (r.kind) {
        case trace_kind::send:
            snprintf(buf, sizeof buf, "%lld send %lld %lld %s %s ", t,
                     (long long)r.node, (long long)r.peer, msg_kind_name(r.mk),
                     outcome_name(r.outcome));
            s = buf;
            s += r.s;
            return s;
        case trace_kind::recv:
            snprintf(buf, sizeof buf, "%lld recv %lld %lld %s", t,
                     (long long)r.node, (long long)r.peer, msg_kind_name(r.mk));
            return buf;
        case trace_kind::state:
            snprintf(buf, sizeof buf, "%lld state %lld %s %lld", t,
                     (long long)r.node, r.s.c_str(), (long long)r.a);
            return buf;
        case trace_kind::elected:
            snprintf(buf, sizeof buf, "%lld elected %lld %lld", t,
                     (long long)r.node, (long long)r.a);
            return buf;
        case trace_kind::append:
            snprintf(buf, sizeof buf, "%lld append %lld %lld %lld %lld ", t,
                     (long long)r.node, (long long)r.a, (long long)r.b,
                     (long long)r.c);
            s = buf;
            s += r.s;
            return s;
        case trace_kind::truncate:
            snprintf(buf, sizeof buf, "%lld truncate %lld %lld", t,
                     (long long)r.node, (long long)r.a);
            return buf;
        case trace_kind::commit:
            snprintf(buf, sizeof buf, "%lld commit %lld %lld %lld", t,
                     (long long)r.node, (long long)r.a, (long long)r.b);
            return buf;
        case trace_kind::cstate:
            snprintf(buf, sizeof buf, "%lld cstate %lld %lld %lld ", t,
                     (long long)r.node, (long long)r.a, (long long)r.b);
            s = buf;
            s += r.s;
            return s;
        case trace_kind::apply:
            snprintf(buf, sizeof buf, "%lld apply %lld %lld ", t,
                     (long long)r.node, (long long)r.a);
            s = buf;
            s += r.s;
            return s;
        case trace_kind::fault:
            snprintf(buf, sizeof buf, "%lld fault ", t);
            s = buf;
            s += r.s;
            return s;
        case trace_kind::client:
            snprintf(buf, sizeof buf, "%lld client %lld %s %lld %lld %lld", t,
                     (long long)r.node, r.s.c_str(), (long long)r.a,
                     (long long)r.b, (long long)r.c);
            return buf;
        case trace_kind::cost:
            snprintf(buf, sizeof buf, "%lld cost %lld %.3f %lld %lld", t,
                     (long long)r.node, r.units, (long long)r.a, (long long)r.b);
            return buf;
        case trace_kind::end:
            snprintf(buf, sizeof buf, "%lld end %lld", t, (long long)r.a);
            return buf;
    }
    return {};
}

namespace {

struct tokenizer {
    const std::string& line;
    size_t pos = 0;

    bool next(std::string& out) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        if (pos >= line.size()) return false;
        size_t start = pos;
        while (pos < line.size() && line[pos] != ' ') ++pos;
        out = line.substr(start, pos - start);
        return true;
    }

    bool next_i64(int64_t& v) {
        std::string tok;
        if (!next(tok)) return false;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        return ec == std::errc{} && p == tok.data() + tok.size();
    }

    std::string rest() {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        return line.substr(pos);
    }
};

}  // namespace

bool parse_record(const std::string& line, trace_record& out, std::string* err) {
    if (err) err->clear();
    if (line.empty() || line[0] == '#') return false;
    auto fail = [&](const char* e) {
        if (err) *err = e;
        return false;
    };
    tokenizer tk{line};
    trace_record r;
    std::string kind, tok;
    if (!tk.next_i64(r.t) || !tk.next(kind)) return fail("missing time/kind");

    if (kind == "send") {
        r.kind = trace_kind::send;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.peer)) return fail("send ids");
        if (!tk.next(tok) || !parse_mk(tok, r.mk)) return fail("send msg kind");
        if (!tk.next(tok) || !parse_outcome(tok, r.outcome)) return fail("send outcome");
        r.s = tk.rest();
    } else if (kind == "recv") {
        r.kind = trace_kind::recv;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.peer)) return fail("recv ids");
        if (!tk.next(tok) || !parse_mk(tok, r.mk)) return fail("recv msg kind");
    } else if (kind == "state") {
        r.kind = trace_kind::state;
        if (!tk.next_i64(r.node)) return fail("state node");
        if (!tk.next(r.s)) return fail("state role");
        if (!tk.next_i64(r.a)) return fail("state term");
    } else if (kind == "elected") {
        r.kind = trace_kind::elected;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.a)) return fail("elected fields");
    } else if (kind == "append") {
        r.kind = trace_kind::append;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.a) || !tk.next_i64(r.b) ||
            !tk.next_i64(r.c))
            return fail("append fields");
        if (!tk.next(r.s)) return fail("append cmd");
    } else if (kind == "truncate") {
        r.kind = trace_kind::truncate;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.a)) return fail("truncate fields");
    } else if (kind == "commit") {
        r.kind = trace_kind::commit;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.a) || !tk.next_i64(r.b))
            return fail("commit fields");
    } else if (kind == "cstate") {
        r.kind = trace_kind::cstate;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.a) || !tk.next_i64(r.b))
            return fail("cstate fields");
        if (!tk.next(r.s)) return fail("cstate bitmap");
    } else if (kind == "apply") {
        r.kind = trace_kind::apply;
        if (!tk.next_i64(r.node) || !tk.next_i64(r.a)) return fail("apply fields");
        if (!tk.next(r.s)) return fail("apply cmd");
    } else if (kind == "fault") {
        r.kind = trace_kind::fault;
        r.s = tk.rest();
    } else if (kind == "client") {
        r.kind = trace_kind::client;
        if (!tk.next_i64(r.node)) return fail("client id");
        if (!tk.next(r.s)) return fail("client event");
        if (!tk.next_i64(r.a) || !tk.next_i64(r.b) || !tk.next_i64(r.c))
            return fail("client fields");
    } else if (kind == "cost") {
        r.kind = trace_kind::cost;
        if (!tk.next_i64(r.node)) return fail("cost node");
        if (!tk.next(tok)) return fail("cost units");
        r.units = strtod(tok.c_str(), nullptr);
        if (!tk.next_i64(r.a) || !tk.next_i64(r.b)) return fail("cost counters");
    } else if (kind == "end") {
        r.kind = trace_kind::end;
        if (!tk.next_i64(r.a)) return fail("end count");
    } else {
        return fail("unknown record kind");
    }
    out = std::move(r);
    return true;
}

trace_file_writer::trace_file_writer(const std::string& path, uint32_t n,
                                     variant v, uint64_t seed) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    ok_ = out_.is_open();
    if (ok_) {
        out_ << "# raftsim-trace v1\n";
        out_ << "# n=" << n << " variant=" << variant_name(v) << " seed=" << seed
             << "\n";
    }
}

void trace_file_writer::on_record(const trace_record& r) {
    if (!ok_) return;
    out_ << format_record(r) << '\n';
}

void trace_file_writer::close() {
    if (ok_) out_.flush();
    out_.close();
    ok_ = false;
}

void trace_hasher::on_record(const trace_record& r) {
    std::string line = format_record(r);
    h_ = fnv1a(line.data(), line.size(), h_);
    h_ = fnv1a("\n", 1, h_);
}

}  // namespace raftsim
