#pragma once
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "raftsim/types.hpp"

namespace raftsim {

// Bitmap/MaxCommit/NextCommit triple piggybacked on AppendEntries traffic.
// Present iff the run is Version 2.
struct commit_fields {
    bitmap bm;
    index_t max_commit = 0;
    index_t next_commit = 1;

    bool operator==(const commit_fields&) const = default;
};

struct append_entries_msg {
    term_t term = 0;
    node_id leader_id = 0;
    index_t prev_log_index = 0;
    term_t prev_log_term = 0;
    std::vector<log_entry> entries;
    index_t leader_commit = 0;
    bool is_gossip = false;     // false: point-to-point RPC (baseline or repair)
    uint64_t round_lc = 0;      // round logical clock within the current term
    std::optional<commit_fields> commit;  // V2 only

    bool operator==(const append_entries_msg&) const = default;
};

struct append_entries_reply {
    term_t term = 0;
    bool success = false;
    node_id replier_id = 0;
    index_t match_hint = 0;  // highest index the replier confirms replicated
    std::optional<commit_fields> commit;  // V2 only

    bool operator==(const append_entries_reply&) const = default;
};

struct request_vote_msg {
    term_t term = 0;
    node_id candidate_id = 0;
    index_t last_log_index = 0;
    term_t last_log_term = 0;

    bool operator==(const request_vote_msg&) const = default;
};

struct request_vote_reply {
    term_t term = 0;
    bool vote_granted = false;

    bool operator==(const request_vote_reply&) const = default;
};

// Workload-facing messages (artifact plumbing, not part of the protocol
// encoding surface).
struct client_request {
    uint64_t request_id = 0;
    uint32_t attempt = 0;
    std::string command;

    bool operator==(const client_request&) const = default;
};

enum class client_status { ok, redirect, unavailable };

struct client_response {
    uint64_t request_id = 0;
    uint32_t attempt = 0;
    client_status status = client_status::ok;
    int64_t leader_hint = -1;  // -1: none
    index_t index = 0;         // log index for ok

    bool operator==(const client_response&) const = default;
};

using message = std::variant<append_entries_msg, append_entries_reply,
                             request_vote_msg, request_vote_reply,
                             client_request, client_response>;

struct envelope {
    node_id from = 0;
    node_id to = 0;
    message payload;
};

// Message kind tags used in traces and per-kind cost lookup.
enum class msg_kind { ae, ae_reply, vote, vote_reply, client_req, client_resp };
const char* msg_kind_name(msg_kind k);
msg_kind kind_of(const message& m);

// --- Canonical structured-text encoding -------------------------------------
//
// One line per message, stable field order, field names exactly:
//   AppendEntries{term= leaderId= prevLogIndex= prevLogTerm= entries=
//                 leaderCommit= isGossip= roundLC= [bitmap= maxCommit= nextCommit=]}
//   AppendEntriesReply{term= success= replierId= matchHint= [bitmap= maxCommit= nextCommit=]}
//   RequestVote{term= candidateId= lastLogIndex= lastLogTerm=}
//   RequestVoteReply{term= voteGranted=}
// Commands are hex-encoded. V2 fields appear iff present.

std::string encode_message(const message& m);
bool decode_message(const std::string& line, message& out, std::string* err = nullptr);

// Compact one-token summary for trace lines.
std::string summarize_message(const message& m);

// Verdict-returning well-formedness check (total function).
// Returns empty string for ok, otherwise a violation description.
std::string validate_append_entries(const append_entries_msg& m, uint32_t n, variant v);

}  // namespace raftsim
