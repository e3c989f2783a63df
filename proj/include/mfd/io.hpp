#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mfd/flow.hpp"
#include "mfd/image.hpp"

namespace mfd {

/// Reads an 8-bit gray or RGB PNG; samples are raw/255. Palette and
/// sub-byte gray inputs are expanded, alpha is dropped, 16-bit is rejected.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG with round(sample*255). Throws ParameterError if any
/// sample is non-finite or outside [0,1].
void save_image(const Image& img, const std::filesystem::path& path);

/// MFLW v1: "MFLW", u16 version, u32 width, u32 height, then row-major
/// (i16 u, i16 v) pairs, all little-endian.
inline constexpr std::uint16_t kFlowFormatVersion = 1;
inline constexpr std::size_t kFlowHeaderSize = 14;

std::vector<std::uint8_t> encode_flow(const MotionFlow& flow);
MotionFlow decode_flow(std::span<const std::uint8_t> bytes, const std::string& source = "MFLW data");

void write_flow(const MotionFlow& flow, const std::filesystem::path& path);
MotionFlow read_flow(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mfd
