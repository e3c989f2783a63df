#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfd/flow.hpp"

namespace mfd::net {

enum class LayerKind {
  conv,           // same-padded convolution, stride 1, optional ReLU
  maxpool,        // 2x2 max pooling, stride 2
  upconv,         // fractionally-strided convolution, kernel 2f, stride f, pad f/2, no bias
  skip_add,       // out = in + 1x1 projection of an earlier layer's output
  softmax_split,  // marks the logits: first `split` channels form the u head
};

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::string name;
  int kernel = 1;     // conv spatial size
  int in_channels = 0;
  int out_channels = 0;
  int factor = 1;     // upconv upsampling factor / pool stride
  int skip_from = -1; // skip_add: index of the layer whose output is projected
  bool relu = false;
  int split = 0;      // softmax_split: size of the u head

  bool operator==(const LayerSpec&) const = default;
};

/// Ordered layer list of a fully-convolutional classifier. Layer k consumes
/// the output of layer k-1 (the input image for k = 0).
struct ArchSpec {
  std::vector<LayerSpec> layers;
  FlowDomain domain;

  /// Spatial divisor the input must be a multiple of.
  int stride() const;
  int input_channels() const { return layers.empty() ? 0 : layers.front().in_channels; }
  int output_channels() const { return domain.label_count(); }

  /// Checks channel chaining, skip sources, the final soft-max split and
  /// that upsampling undoes pooling. Throws ParameterError.
  void validate() const;

  /// Hex SHA-256 of the canonical JSON form.
  std::string digest() const;

  bool operator==(const ArchSpec&) const = default;
};

void to_json(nlohmann::json& j, const ArchSpec& arch);
ArchSpec arch_from_json(const nlohmann::json& j);

/// Seven convs, four pools, three upconvs with skips from pool3 and pool2.
/// width_divisor scales all hidden widths (1 = full, 2 = toy).
ArchSpec fcn_arch(const FlowDomain& dom, int width_divisor);

inline ArchSpec paper_arch(const FlowDomain& dom) { return fcn_arch(dom, 1); }
inline ArchSpec toy_arch(const FlowDomain& dom) { return fcn_arch(dom, 2); }

/// Resolves "paper" or "toy".
ArchSpec preset_arch(const std::string& preset, const FlowDomain& dom);

}  // namespace mfd::net
