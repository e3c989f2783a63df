#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace mfd {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
Sha256 sha256(std::string_view text);
std::string to_hex(const Sha256& digest);

/// Hex SHA-256 of the canonical serialization (sorted keys, no whitespace).
std::string json_digest(const nlohmann::json& value);

}  // namespace mfd
