#include "mfd/net/arch.hpp"

#include "mfd/digest.hpp"
#include "mfd/errors.hpp"

namespace mfd::net {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upconv: return "upconv";
    case LayerKind::skip_add: return "skip_add";
    case LayerKind::softmax_split: return "softmax_split";
  }
  return "?";
}

LayerKind kind_from(const std::string& s) {
  for (auto k : {LayerKind::conv, LayerKind::maxpool, LayerKind::upconv, LayerKind::skip_add, LayerKind::softmax_split})
    if (s == kind_name(k)) return k;
  throw ParameterError("arch: unknown layer kind \"" + s + "\"");
}

}  // namespace

int ArchSpec::stride() const {
  int s = 1;
  for (const auto& l : layers)
    if (l.kind == LayerKind::maxpool) s *= l.factor;
  return s;
}

void ArchSpec::validate() const {
  if (layers.empty()) throw ParameterError("arch: no layers");
  if (layers.back().kind != LayerKind::softmax_split) throw ParameterError("arch: last layer must be softmax_split");
  // scale[k] = downsampling factor of layer k's output.
  std::vector<int> scale(layers.size());
  std::vector<int> channels(layers.size());
  int cur_scale = 1;
  int cur_ch = input_channels();
  if (cur_ch < 1) throw ParameterError("arch: first layer needs input channels");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const std::string where = "arch layer " + std::to_string(k) + " (" + l.name + "): ";
    if (l.in_channels != cur_ch)
      throw ParameterError(where + "expects " + std::to_string(l.in_channels) + " channels, receives " +
                           std::to_string(cur_ch));
    switch (l.kind) {
      case LayerKind::conv:
        if (l.kernel < 1 || l.kernel % 2 == 0) throw ParameterError(where + "conv kernel must be odd");
        cur_ch = l.out_channels;
        break;
      case LayerKind::maxpool:
        if (l.factor != 2) throw ParameterError(where + "pooling factor must be 2");
        if (l.out_channels != l.in_channels) throw ParameterError(where + "pooling keeps channels");
        cur_scale *= l.factor;
        break;
      case LayerKind::upconv:
        if (l.factor < 2 || l.factor % 2 != 0) throw ParameterError(where + "upconv factor must be even");
        if (cur_scale % l.factor != 0) throw ParameterError(where + "upsampling exceeds pooling");
        cur_scale /= l.factor;
        cur_ch = l.out_channels;
        break;
      case LayerKind::skip_add:
        if (l.skip_from < 0 || static_cast<std::size_t>(l.skip_from) >= k)
          throw ParameterError(where + "skip source must be an earlier layer");
        if (scale[static_cast<std::size_t>(l.skip_from)] != cur_scale)
          throw ParameterError(where + "skip source resolution differs");
        if (l.out_channels != l.in_channels) throw ParameterError(where + "skip_add keeps channels");
        break;
      case LayerKind::softmax_split:
        if (l.out_channels != l.in_channels) throw ParameterError(where + "softmax_split keeps channels");
        if (l.split != domain.u_count() || l.in_channels != domain.label_count())
          throw ParameterError(where + "split does not match the flow domain");
        break;
    }
    if (l.out_channels < 1) throw ParameterError(where + "output channels must be positive");
    scale[k] = cur_scale;
    channels[k] = cur_ch;
  }
  if (cur_scale != 1) throw ParameterError("arch: output resolution differs from input");
  if (cur_ch != domain.label_count()) throw ParameterError("arch: output channels differ from label count");
}

std::string ArchSpec::digest() const { return json_digest(nlohmann::json(*this)); }

void to_json(nlohmann::json& j, const ArchSpec& arch) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : arch.layers)
    layers.push_back({{"kind", kind_name(l.kind)},
                      {"name", l.name},
                      {"kernel", l.kernel},
                      {"in", l.in_channels},
                      {"out", l.out_channels},
                      {"factor", l.factor},
                      {"skip_from", l.skip_from},
                      {"relu", l.relu},
                      {"split", l.split}});
  j = {{"layers", layers}, {"u_max", arch.domain.u_max()}, {"v_max", arch.domain.v_max()}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec arch;
  try {
    arch.domain = FlowDomain(j.at("u_max").get<int>(), j.at("v_max").get<int>());
    for (const auto& l : j.at("layers")) {
      LayerSpec s;
      s.kind = kind_from(l.at("kind").get<std::string>());
      s.name = l.at("name").get<std::string>();
      s.kernel = l.at("kernel").get<int>();
      s.in_channels = l.at("in").get<int>();
      s.out_channels = l.at("out").get<int>();
      s.factor = l.at("factor").get<int>();
      s.skip_from = l.at("skip_from").get<int>();
      s.relu = l.at("relu").get<bool>();
      s.split = l.at("split").get<int>();
      arch.layers.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("arch: ") + e.what());
  }
  arch.validate();
  return arch;
}

ArchSpec fcn_arch(const FlowDomain& dom, int width_divisor) {
  if (width_divisor < 1) throw ParameterError("arch: width divisor must be >= 1");
  const int d = dom.label_count();
  const auto w = [&](int full) { return std::max(1, full / width_divisor); };
  const auto conv = [](std::string name, int k, int in, int out, bool relu) {
    return LayerSpec{LayerKind::conv, std::move(name), k, in, out, 1, -1, relu, 0};
  };
  const auto pool = [](std::string name, int ch) {
    return LayerSpec{LayerKind::maxpool, std::move(name), 2, ch, ch, 2, -1, false, 0};
  };
  const auto up = [d](std::string name, int f) {
    return LayerSpec{LayerKind::upconv, std::move(name), 2 * f, d, d, f, -1, false, 0};
  };
  const auto skip = [d](std::string name, int from) {
    return LayerSpec{LayerKind::skip_add, std::move(name), 1, d, d, 1, from, false, 0};
  };
  ArchSpec arch;
  arch.domain = dom;
  arch.layers = {
      conv("conv1", 7, 3, w(64), true),          // 0
      conv("conv2", 5, w(64), w(128), true),     // 1
      pool("pool1", w(128)),                     // 2
      conv("conv3", 5, w(128), w(256), true),    // 3
      pool("pool2", w(256)),                     // 4
      conv("conv4", 3, w(256), w(256), true),    // 5
      pool("pool3", w(256)),                     // 6
      conv("conv5", 3, w(256), w(512), true),    // 7
      conv("conv6", 3, w(512), w(512), true),    // 8
      pool("pool4", w(512)),                     // 9
      conv("conv7", 1, w(512), d, false),        // 10
      up("uconv1", 2),                           // 11
      skip("skip_pool3", 6),                     // 12
      up("uconv2", 2),                           // 13
      skip("skip_pool2", 4),                     // 14
      up("uconv3", 4),                           // 15
      LayerSpec{LayerKind::softmax_split, "softmax", 1, d, d, 1, -1, false, dom.u_count()},
  };
  arch.validate();
  return arch;
}

ArchSpec preset_arch(const std::string& preset, const FlowDomain& dom) {
  if (preset == "paper") return paper_arch(dom);
  if (preset == "toy") return toy_arch(dom);
  throw ParameterError("unknown architecture preset \"" + preset + "\" (expected paper or toy)");
}

}  // namespace mfd::net
