#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gensheet/digest.hpp"

namespace gensheet::gen {

inline constexpr double kDefaultCfg = 7.0;
inline constexpr uint32_t kDefaultSeed = 0;
inline constexpr double kMaxCfg = 35.0;
inline constexpr int kImageSize = 512;

/// The (prompt, seed, cfg) triple identifying one image.
struct GenerationKey {
    std::string prompt;
    uint64_t seed = kDefaultSeed;
    double cfg = kDefaultCfg;

    bool operator==(const GenerationKey&) const = default;
};

/// Reason the key is invalid, or nullopt. cfg must sit on the 0.1 grid.
std::optional<std::string> validate_key(const GenerationKey& key);

/// `7` -> "7.0", `7.5` -> "7.5".
std::string format_cfg(double cfg);

/// UTF-8 prompt, 0x1F, decimal seed, 0x1F, cfg with one decimal place.
std::string canonical_encoding(const GenerationKey& key);

/// SHA-256 of the canonical encoding; hex of this is the ImageRef id.
Sha256Digest key_digest(const GenerationKey& key);
std::string key_id(const GenerationKey& key);

struct LlmMessage {
    std::string role;  // system | user | assistant
    std::string content;

    bool operator==(const LlmMessage&) const = default;
};

struct LlmRequest {
    std::vector<LlmMessage> messages;
    bool expects_list = false;
    std::optional<int> expected_length;

    bool operator==(const LlmRequest&) const = default;
};

bool is_valid_role(const std::string& role);

}  // namespace gensheet::gen
