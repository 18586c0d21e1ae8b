#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace gensheet {

using Sha256Digest = std::array<uint8_t, 32>;

Sha256Digest sha256(std::span<const uint8_t> bytes);
Sha256Digest sha256(std::string_view bytes);

std::string to_hex(std::span<const uint8_t> bytes);

}  // namespace gensheet
