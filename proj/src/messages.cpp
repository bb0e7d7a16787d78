#include "raftsim/messages.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>

namespace raftsim {

const char* msg_kind_name(msg_kind k) {
    switch (k) {
        case msg_kind::ae: return "AE";
        case msg_kind::ae_reply: return "AER";
        case msg_kind::vote: return "RV";
        case msg_kind::vote_reply: return "RVR";
        case msg_kind::client_req: return "CRQ";
        case msg_kind::client_resp: return "CRP";
    }
    return "?";
}

msg_kind kind_of(const message& m) {
    return msg_kind(m.index());
}

namespace {

const char kHex[] = "0123456789abcdef";

void hex_encode(const std::string& in, std::string& out) {
    for (unsigned char c : in) {
        out.push_back(kHex[c >> 4]);
        out.push_back(kHex[c & 15]);
    }
}

bool hex_decode(const std::string& in, std::string& out) {
    if (in.size() % 2) return false;
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    out.clear();
    for (size_t i = 0; i < in.size(); i += 2) {
        int hi = nib(in[i]), lo = nib(in[i + 1]);
        if (hi < 0 || lo < 0) return false;
        out.push_back(char(hi * 16 + lo));
    }
    return true;
}

void put_i64(std::string& s, const char* key, int64_t v) {
    char buf[32];
    snprintf(buf, sizeof buf, "%lld", (long long)v);
    s += key;
    s += '=';
    s += buf;
    s += ' ';
}

void put_bool(std::string& s, const char* key, bool v) {
    s += key;
    s += '=';
    s += v ? "true" : "false";
    s += ' ';
}

void put_commit(std::string& s, const std::optional<commit_fields>& c) {
    if (!c) return;
    s += "bitmap=";
    s += c->bm.to_string();
    s += ' ';
    put_i64(s, "maxCommit", c->max_commit);
    put_i64(s, "nextCommit", c->next_commit);
}

void finish(std::string& s) {
    if (!s.empty() && s.back() == ' ') s.back() = '}';
    else s += '}';
}

// key=value scanner over the "Name{...}" body.
struct field_scanner {
    std::string body;
    size_t pos = 0;
    std::string err;

    bool take(const char* key, std::string& value) {
        size_t klen = strlen(key);
        while (pos < body.size() && body[pos] == ' ') ++pos;
        if (body.compare(pos, klen, key) != 0 || pos + klen >= body.size() ||
            body[pos + klen] != '=') {
            err = std::string("expected field ") + key;
            return false;
        }
        pos += klen + 1;
        size_t start = pos;
        if (pos < body.size() && body[pos] == '[') {  // bracketed list
            int depth = 0;
            while (pos < body.size()) {
                if (body[pos] == '[') ++depth;
                if (body[pos] == ']' && --depth == 0) { ++pos; break; }
                ++pos;
            }
        } else {
            while (pos < body.size() && body[pos] != ' ') ++pos;
        }
        value = body.substr(start, pos - start);
        return true;
    }

    bool maybe(const char* key, std::string& value) {
        size_t save = pos;
        if (take(key, value)) return true;
        pos = save;
        err.clear();
        return false;
    }

    bool at_end() {
        while (pos < body.size() && body[pos] == ' ') ++pos;
        return pos >= body.size();
    }
};

bool to_i64(const std::string& s, int64_t& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool to_bool(const std::string& s, bool& v) {
    if (s == "true") { v = true; return true; }
    if (s == "false") { v = false; return true; }
    return false;
}

bool parse_commit(field_scanner& f, std::optional<commit_fields>& out, std::string& err) {
    std::string bits;
    if (!f.maybe("bitmap", bits)) { out.reset(); return true; }
    commit_fields c;
    if (!bitmap::from_string(bits, c.bm)) { err = "bad bitmap"; return false; }
    std::string v;
    if (!f.take("maxCommit", v) || !to_i64(v, c.max_commit)) { err = "bad maxCommit"; return false; }
    if (!f.take("nextCommit", v) || !to_i64(v, c.next_commit)) { err = "bad nextCommit"; return false; }
    out = std::move(c);
    return true;
}

bool parse_entries(const std::string& list, std::vector<log_entry>& out, std::string& err) {
    out.clear();
    if (list.size() < 2 || list.front() != '[' || list.back() != ']') {
        err = "bad entries list";
        return false;
    }
    size_t pos = 1;
    const size_t end = list.size() - 1;
    while (pos < end) {
        if (list[pos] == ' ') { ++pos; continue; }
        // {term=T command=HEX}
        if (list.compare(pos, 6, "{term=") != 0) { err = "bad entry"; return false; }
        pos += 6;
        size_t sp = list.find(' ', pos);
        if (sp == std::string::npos) { err = "bad entry"; return false; }
        log_entry e;
        if (!to_i64(list.substr(pos, sp - pos), e.term)) { err = "bad entry term"; return false; }
        pos = sp + 1;
        if (list.compare(pos, 8, "command=") != 0) { err = "bad entry"; return false; }
        pos += 8;
        size_t close = list.find('}', pos);
        if (close == std::string::npos) { err = "bad entry"; return false; }
        if (!hex_decode(list.substr(pos, close - pos), e.command)) {
            err = "bad entry command hex";
            return false;
        }
        out.push_back(std::move(e));
        pos = close + 1;
    }
    return true;
}

}  // namespace

std::string encode_message(const message& m) {
    std::string s;
    if (auto* ae = std::get_if<append_entries_msg>(&m)) {
        s = "AppendEntries{";
        put_i64(s, "term", ae->term);
        put_i64(s, "leaderId", ae->leader_id);
        put_i64(s, "prevLogIndex", ae->prev_log_index);
        put_i64(s, "prevLogTerm", ae->prev_log_term);
        s += "entries=[";
        for (size_t i = 0; i < ae->entries.size(); ++i) {
            if (i) s += ' ';
            s += "{term=";
            char buf[32];
            snprintf(buf, sizeof buf, "%lld", (long long)ae->entries[i].term);
            s += buf;
            s += " command=";
            hex_encode(ae->entries[i].command, s);
            s += '}';
        }
        s += "] ";
        put_i64(s, "leaderCommit", ae->leader_commit);
        put_bool(s, "isGossip", ae->is_gossip);
        put_i64(s, "roundLC", int64_t(ae->round_lc));
        put_commit(s, ae->commit);
        finish(s);
    } else if (auto* r = std::get_if<append_entries_reply>(&m)) {
        s = "AppendEntriesReply{";
        put_i64(s, "term", r->term);
        put_bool(s, "success", r->success);
        put_i64(s, "replierId", r->replier_id);
        put_i64(s, "matchHint", r->match_hint);
        put_commit(s, r->commit);
        finish(s);
    } else if (auto* v = std::get_if<request_vote_msg>(&m)) {
        s = "RequestVote{";
        put_i64(s, "term", v->term);
        put_i64(s, "candidateId", v->candidate_id);
        put_i64(s, "lastLogIndex", v->last_log_index);
        put_i64(s, "lastLogTerm", v->last_log_term);
        finish(s);
    } else if (auto* vr = std::get_if<request_vote_reply>(&m)) {
        s = "RequestVoteReply{";
        put_i64(s, "term", vr->term);
        put_bool(s, "voteGranted", vr->vote_granted);
        finish(s);
    } else if (auto* cq = std::get_if<client_request>(&m)) {
        s = "ClientRequest{";
        put_i64(s, "requestId", int64_t(cq->request_id));
        put_i64(s, "attempt", cq->attempt);
        s += "command=";
        hex_encode(cq->command, s);
        s += ' ';
        finish(s);
    } else if (auto* cr = std::get_if<client_response>(&m)) {
        s = "ClientResponse{";
        put_i64(s, "requestId", int64_t(cr->request_id));
        put_i64(s, "attempt", cr->attempt);
        put_i64(s, "status", int64_t(cr->status));
        put_i64(s, "leaderHint", cr->leader_hint);
        put_i64(s, "index", cr->index);
        finish(s);
    }
    return s;
}

bool decode_message(const std::string& line, message& out, std::string* err_out) {
    std::string err;
    auto fail = [&](const std::string& e) {
        if (err_out) *err_out = e;
        return false;
    };
    size_t brace = line.find('{');
    if (brace == std::string::npos || line.back() != '}') return fail("no message body");
    std::string name = line.substr(0, brace);
    field_scanner f{line.substr(brace + 1, line.size() - brace - 2), 0, {}};
    std::string v;

    if (name == "AppendEntries") {
        append_entries_msg m;
        int64_t tmp;
        if (!f.take("term", v) || !to_i64(v, m.term)) return fail("bad term");
        if (!f.take("leaderId", v) || !to_i64(v, tmp)) return fail("bad leaderId");
        m.leader_id = node_id(tmp);
        if (!f.take("prevLogIndex", v) || !to_i64(v, m.prev_log_index)) return fail("bad prevLogIndex");
        if (!f.take("prevLogTerm", v) || !to_i64(v, m.prev_log_term)) return fail("bad prevLogTerm");
        if (!f.take("entries", v) || !parse_entries(v, m.entries, err)) return fail(err.empty() ? "bad entries" : err);
        if (!f.take("leaderCommit", v) || !to_i64(v, m.leader_commit)) return fail("bad leaderCommit");
        if (!f.take("isGossip", v) || !to_bool(v, m.is_gossip)) return fail("bad isGossip");
        if (!f.take("roundLC", v) || !to_i64(v, tmp) || tmp < 0) return fail("bad roundLC");
        m.round_lc = uint64_t(tmp);
        if (!parse_commit(f, m.commit, err)) return fail(err);
        if (!f.at_end()) return fail("trailing fields");
        out = std::move(m);
        return true;
    }
    if (name == "AppendEntriesReply") {
        append_entries_reply m;
        int64_t tmp;
        if (!f.take("term", v) || !to_i64(v, m.term)) return fail("bad term");
        if (!f.take("success", v) || !to_bool(v, m.success)) return fail("bad success");
        if (!f.take("replierId", v) || !to_i64(v, tmp)) return fail("bad replierId");
        m.replier_id = node_id(tmp);
        if (!f.take("matchHint", v) || !to_i64(v, m.match_hint)) return fail("bad matchHint");
        if (!parse_commit(f, m.commit, err)) return fail(err);
        if (!f.at_end()) return fail("trailing fields");
        out = std::move(m);
        return true;
    }
    if (name == "RequestVote") {
        request_vote_msg m;
        int64_t tmp;
        if (!f.take("term", v) || !to_i64(v, m.term)) return fail("bad term");
        if (!f.take("candidateId", v) || !to_i64(v, tmp)) return fail("bad candidateId");
        m.candidate_id = node_id(tmp);
        if (!f.take("lastLogIndex", v) || !to_i64(v, m.last_log_index)) return fail("bad lastLogIndex");
        if (!f.take("lastLogTerm", v) || !to_i64(v, m.last_log_term)) return fail("bad lastLogTerm");
        if (!f.at_end()) return fail("trailing fields");
        out = std::move(m);
        return true;
    }
    if (name == "RequestVoteReply") {
        request_vote_reply m;
        if (!f.take("term", v) || !to_i64(v, m.term)) return fail("bad term");
        if (!f.take("voteGranted", v) || !to_bool(v, m.vote_granted)) return fail("bad voteGranted");
        if (!f.at_end()) return fail("trailing fields");
        out = std::move(m);
        return true;
    }
    return fail("unknown message type: " + name);
}

std::string summarize_message(const message& m) {
    char buf[160];
    if (auto* ae = std::get_if<append_entries_msg>(&m)) {
        snprintf(buf, sizeof buf, "t%lld:l%u:p%lld/%lld:e%zu:c%lld:g%d:r%llu",
                 (long long)ae->term, ae->leader_id, (long long)ae->prev_log_index,
                 (long long)ae->prev_log_term, ae->entries.size(),
                 (long long)ae->leader_commit, ae->is_gossip ? 1 : 0,
                 (unsigned long long)ae->round_lc);
        std::string s = buf;
        if (ae->commit) {
            snprintf(buf, sizeof buf, ":mc%lld:nc%lld:bm%s",
                     (long long)ae->commit->max_commit,
                     (long long)ae->commit->next_commit,
                     ae->commit->bm.to_string().c_str());
            s += buf;
        }
        return s;
    }
    if (auto* r = std::get_if<append_entries_reply>(&m)) {
        snprintf(buf, sizeof buf, "t%lld:%s:f%u:m%lld", (long long)r->term,
                 r->success ? "ok" : "no", r->replier_id, (long long)r->match_hint);
        std::string s = buf;
        if (r->commit) {
            snprintf(buf, sizeof buf, ":mc%lld:nc%lld:bm%s",
                     (long long)r->commit->max_commit,
                     (long long)r->commit->next_commit,
                     r->commit->bm.to_string().c_str());
            s += buf;
        }
        return s;
    }
    if (auto* vm = std::get_if<request_vote_msg>(&m)) {
        snprintf(buf, sizeof buf, "t%lld:c%u:ll%lld/%lld", (long long)vm->term,
                 vm->candidate_id, (long long)vm->last_log_index,
                 (long long)vm->last_log_term);
        return buf;
    }
    if (auto* vr = std::get_if<request_vote_reply>(&m)) {
        snprintf(buf, sizeof buf, "t%lld:%s", (long long)vr->term,
                 vr->vote_granted ? "yes" : "no");
        return buf;
    }
    if (auto* cq = std::get_if<client_request>(&m)) {
        snprintf(buf, sizeof buf, "q%llu.%u:b%zu", (unsigned long long)cq->request_id,
                 cq->attempt, cq->command.size());
        return buf;
    }
    if (auto* cr = std::get_if<client_response>(&m)) {
        snprintf(buf, sizeof buf, "q%llu.%u:s%d:h%lld:i%lld",
                 (unsigned long long)cr->request_id, cr->attempt, int(cr->status),
                 (long long)cr->leader_hint, (long long)cr->index);
        return buf;
    }
    return "?";
}

std::string validate_append_entries(const append_entries_msg& m, uint32_t n, variant v) {
    if (m.prev_log_index < 0) return "negative prevLogIndex";
    if (v == variant::v2) {
        if (!m.commit) return "missing V2 commit fields";
        if (m.commit->bm.size() != n) return "bitmap length mismatch";
    } else if (m.commit) {
        return "unexpected V2 field";
    }
    term_t prev = m.prev_log_term;
    for (const auto& e : m.entries) {
        if (e.term < prev) return "non-monotone terms";
        prev = e.term;
    }
    return {};
}

}  // namespace raftsim
