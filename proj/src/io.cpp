#include "mfd/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace mfd {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t(b[at]) | (std::uint32_t(b[at + 1]) << 8) | (std::uint32_t(b[at + 2]) << 16) |
         (std::uint32_t(b[at + 3]) << 24);
}

std::int16_t get_i16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::int16_t>(std::uint16_t(b[at]) | (std::uint16_t(b[at + 1]) << 8));
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image file not found: " + path.string());
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw IoError("unsupported PNG bit depth (16-bit) in " + path.string());
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  const int h = static_cast<int>(png.height);
  const int w = static_cast<int>(png.width);
  std::vector<double> samples(buffer.size());
  for (std::size_t k = 0; k < buffer.size(); ++k) samples[k] = buffer[k] / 255.0;
  return Image::from_interleaved(h, w, channels, samples);
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty() || !img.is_valid())
    throw ParameterError("refusing to write " + path.string() + ": samples must be finite and in [0,1]");
  const auto samples = img.interleaved();
  std::vector<png_byte> buffer(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k)
    buffer[k] = static_cast<png_byte>(std::clamp(std::lround(samples[k] * 255.0), 0L, 255L));
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
}

std::vector<std::uint8_t> encode_flow(const MotionFlow& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(kFlowHeaderSize + 4 * static_cast<std::size_t>(flow.height()) * flow.width());
  for (char c : {'M', 'F', 'L', 'W'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kFlowFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (int r = 0; r < flow.height(); ++r)
    for (int c = 0; c < flow.width(); ++c) {
      const Motion m = flow.at(r, c);
      if (m.u < std::numeric_limits<std::int16_t>::min() || m.u > std::numeric_limits<std::int16_t>::max() ||
          m.v < std::numeric_limits<std::int16_t>::min() || m.v > std::numeric_limits<std::int16_t>::max())
        throw DomainError("flow vector does not fit int16 storage");
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(m.u)));
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(m.v)));
    }
  return out;
}

MotionFlow decode_flow(std::span<const std::uint8_t> bytes, const std::string& source) {
  const std::string pre = source + ": ";
  if (bytes.size() < 4) throw FormatError(pre + "truncated MFLW header", bytes.size());
  if (std::memcmp(bytes.data(), "MFLW", 4) != 0) throw FormatError(pre + "bad magic, expected \"MFLW\"", 0);
  if (bytes.size() < kFlowHeaderSize) throw FormatError(pre + "truncated MFLW header", bytes.size());
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kFlowFormatVersion)
    throw FormatError(pre + "unsupported MFLW version " + std::to_string(version), 4);
  const std::uint32_t w = get_u32(bytes, 6);
  const std::uint32_t h = get_u32(bytes, 10);
  if (w == 0 || h == 0) throw FormatError(pre + "MFLW dimensions must be positive", 6);
  const std::uint64_t payload = 4ull * w * h;
  if (bytes.size() - kFlowHeaderSize < payload)
    throw FormatError(pre + "truncated MFLW payload: expected " + std::to_string(payload) + " bytes", bytes.size());
  if (bytes.size() - kFlowHeaderSize > payload)
    throw FormatError(pre + "trailing bytes after MFLW payload", kFlowHeaderSize + payload);
  MotionFlow flow(static_cast<int>(h), static_cast<int>(w));
  std::size_t at = kFlowHeaderSize;
  for (int r = 0; r < flow.height(); ++r)
    for (int c = 0; c < flow.width(); ++c, at += 4) flow.set(r, c, {get_i16(bytes, at), get_i16(bytes, at + 2)});
  return flow;
}

void write_flow(const MotionFlow& flow, const std::filesystem::path& path) {
  const auto bytes = encode_flow(flow);
  write_file(path, bytes);
}

MotionFlow read_flow(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_flow(bytes, path.string());
}

}  // namespace mfd
