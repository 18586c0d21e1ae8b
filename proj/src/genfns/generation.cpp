#include "gensheet/genfns/generation.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace gensheet::gen {

namespace {

bool blank_after_trim(const std::string& s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

}  // namespace

std::optional<std::string> validate_key(const GenerationKey& key) {
    if (blank_after_trim(key.prompt)) return "prompt is empty";
    if (key.seed > 0xFFFFFFFFull) return "seed out of range [0, 4294967295]";
    if (!std::isfinite(key.cfg) || key.cfg < 0 || key.cfg > kMaxCfg) return "cfg out of range [0, 35]";
    const double tenths = key.cfg * 10.0;
    if (std::fabs(tenths - std::round(tenths)) > 1e-9) return "cfg must have at most one decimal place";
    return std::nullopt;
}

std::string format_cfg(double cfg) {
    const long long tenths = std::llround(cfg * 10.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%lld", tenths / 10, tenths % 10);
    return buf;
}

std::string canonical_encoding(const GenerationKey& key) {
    std::string out = key.prompt;
    out.push_back('\x1F');
    out += std::to_string(key.seed);
    out.push_back('\x1F');
    out += format_cfg(key.cfg);
    return out;
}

Sha256Digest key_digest(const GenerationKey& key) { return sha256(canonical_encoding(key)); }

std::string key_id(const GenerationKey& key) { return to_hex(key_digest(key)); }

bool is_valid_role(const std::string& role) { return role == "system" || role == "user" || role == "assistant"; }

}  // namespace gensheet::gen
