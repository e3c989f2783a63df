#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mfd/net/network.hpp"

namespace mfd::net {

/// MFNN v1, little-endian:
///   "MFNN" | u16 version | 32-byte SHA-256 of the architecture JSON
///   | u32 length + architecture JSON | u32 tensor count
///   | per tensor in layer order (weight, then bias): u32 count + float32 data.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams<float>& params);

/// Refuses (FormatError) data whose embedded architecture does not hash to
/// the stored digest, or, when `expected` is given, whose digest differs
/// from expected->digest().
NetworkParams<float> decode_checkpoint(std::span<const std::uint8_t> bytes, const ArchSpec* expected = nullptr,
                                       const std::string& source = "MFNN data");

void save_checkpoint(const NetworkParams<float>& params, const std::filesystem::path& path);
NetworkParams<float> load_checkpoint(const std::filesystem::path& path, const ArchSpec* expected = nullptr);

}  // namespace mfd::net
