#include "mfd/net/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "mfd/digest.hpp"
#include "mfd/errors.hpp"
#include "mfd/io.hpp"

namespace mfd::net {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'N', 'N'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

void put_floats(std::vector<std::uint8_t>& out, const float* data, std::size_t n) {
  put_u32(out, static_cast<std::uint32_t>(n));
  for (std::size_t k = 0; k < n; ++k) put_u32(out, std::bit_cast<std::uint32_t>(data[k]));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, const std::string& source) : b_(b), source_(source) {}

  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw FormatError(source_ + ": truncated " + what, pos_);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = std::uint16_t(b_[pos_]) | std::uint16_t(b_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(b_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }
  const std::string& source() const { return source_; }

 private:
  std::span<const std::uint8_t> b_;
  std::string source_;
  std::size_t pos_ = 0;
};

template <typename M>
void read_tensor(Reader& in, M& dst, const std::string& what) {
  const std::size_t at = in.pos();
  const std::uint32_t n = in.u32("tensor header");
  if (n != static_cast<std::uint32_t>(dst.size()))
    throw FormatError(in.source() + ": " + what + " has " + std::to_string(n) + " values, expected " +
                          std::to_string(dst.size()),
                      at);
  const auto raw = in.bytes(static_cast<std::size_t>(n) * 4, "tensor data");
  for (std::uint32_t k = 0; k < n; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t(raw[4 * k + b]) << (8 * b);
    dst.data()[k] = std::bit_cast<float>(bits);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams<float>& params) {
  params.check_shapes();
  const std::string arch_json = nlohmann::json(params.arch).dump();
  const Sha256 digest = sha256(arch_json);
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u16(out, kCheckpointVersion);
  out.insert(out.end(), digest.begin(), digest.end());
  put_u32(out, static_cast<std::uint32_t>(arch_json.size()));
  out.insert(out.end(), arch_json.begin(), arch_json.end());
  put_u32(out, static_cast<std::uint32_t>(2 * params.layers.size()));
  for (const auto& l : params.layers) {
    put_floats(out, l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    put_floats(out, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

NetworkParams<float> decode_checkpoint(std::span<const std::uint8_t> bytes, const ArchSpec* expected,
                                       const std::string& source) {
  Reader in(bytes, source);
  const auto magic = in.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError(source + ": bad magic, not an MFNN file", 0);
  const std::uint16_t version = in.u16("version");
  if (version != kCheckpointVersion)
    throw FormatError(source + ": unsupported MFNN version " + std::to_string(version), 4);
  Sha256 stored{};
  const auto d = in.bytes(32, "digest");
  std::copy(d.begin(), d.end(), stored.begin());
  const std::size_t json_at = in.pos();
  const std::uint32_t json_len = in.u32("architecture length");
  const auto json_bytes = in.bytes(json_len, "architecture");
  const std::string arch_json(json_bytes.begin(), json_bytes.end());
  if (sha256(arch_json) != stored) throw FormatError(source + ": architecture digest mismatch", 6);
  if (expected && to_hex(stored) != expected->digest())
    throw FormatError(source + ": checkpoint architecture " + to_hex(stored).substr(0, 12) +
                          " differs from expected " + expected->digest().substr(0, 12),
                      6);

  NetworkParams<float> p;
  try {
    p.arch = arch_from_json(nlohmann::json::parse(arch_json));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": malformed architecture JSON: " + e.what(), json_at);
  } catch (const ParameterError& e) {
    throw FormatError(source + ": invalid architecture: " + e.what(), json_at);
  }
  // Shapes come from a freshly initialized network for this architecture.
  p.layers = init_params<float>(p.arch, 0).zeros_like().layers;

  const std::size_t count_at = in.pos();
  const std::uint32_t count = in.u32("tensor count");
  if (count != 2 * p.layers.size())
    throw FormatError(source + ": tensor count " + std::to_string(count) + " does not match architecture", count_at);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    read_tensor(in, p.layers[k].weight, p.arch.layers[k].name + " weight");
    read_tensor(in, p.layers[k].bias, p.arch.layers[k].name + " bias");
  }
  if (!in.done()) throw FormatError(source + ": trailing bytes after last tensor", in.pos());
  return p;
}

void save_checkpoint(const NetworkParams<float>& params, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(params));
}

NetworkParams<float> load_checkpoint(const std::filesystem::path& path, const ArchSpec* expected) {
  return decode_checkpoint(read_file(path), expected, path.string());
}

}  // namespace mfd::net
