#include "raftsim/types.hpp"

namespace raftsim {

const char* variant_name(variant v) {
    switch (v) {
        case variant::baseline: return "baseline";
        case variant::v1: return "v1";
        case variant::v2: return "v2";
    }
    return "?";
}

bool parse_variant(const std::string& s, variant& out) {
    if (s == "baseline") { out = variant::baseline; return true; }
    if (s == "v1") { out = variant::v1; return true; }
    if (s == "v2") { out = variant::v2; return true; }
    return false;
}

const char* role_letter(role r) {
    switch (r) {
        case role::follower: return "F";
        case role::candidate: return "C";
        case role::leader: return "L";
    }
    return "?";
}

}  // namespace raftsim
