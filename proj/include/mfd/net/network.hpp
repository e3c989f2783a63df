#pragma once

#include <cstdint>
#include <vector>

#include "mfd/flow.hpp"
#include "mfd/image.hpp"
#include "mfd/net/arch.hpp"
#include "mfd/net/layers.hpp"

namespace mfd::net {

/// Weight and bias of one layer; both empty for parameter-free layers.
template <typename T>
struct LayerParams {
  Mat<T> weight;
  Vec<T> bias;
};

template <typename T>
struct NetworkParams {
  ArchSpec arch;
  std::vector<LayerParams<T>> layers;

  /// Same shapes, all zeros (used for gradients and velocities).
  NetworkParams zeros_like() const;

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.arch = arch;
    for (const auto& l : layers) out.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
    return out;
  }

  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Throws ShapeError unless every tensor matches `arch`.
  void check_shapes() const;
};

/// Expected (weight rows, weight cols, bias size) of layer k.
struct TensorShape {
  long rows = 0;
  long cols = 0;
  long bias = 0;
};
TensorShape layer_shape(const LayerSpec& l);

/// Fan-in scaled uniform weights (He for ReLU layers, LeCun otherwise), zero
/// biases, bilinear upconv kernels on the channel diagonal.
template <typename T>
NetworkParams<T> init_params(const ArchSpec& arch, std::uint64_t seed);

/// Network input: gray is replicated to three channels, samples centered
/// by subtracting 0.5.
template <typename T>
Feature<T> to_input(const Image& y);

/// Per-pixel head probabilities: pu is (|D_u+|, H*W), pv is (|D_v|, H*W).
template <typename T>
struct Prediction {
  Mat<T> pu;
  Mat<T> pv;
  int height = 0;
  int width = 0;
};

/// Raw logits (D, H*W). H and W must be multiples of arch.stride().
template <typename T>
Feature<T> forward_logits(const NetworkParams<T>& params, const Image& y);

template <typename T>
Prediction<T> forward(const NetworkParams<T>& params, const Image& y);

enum class LossMode { sum, mean };

template <typename T>
struct LossGrad {
  double loss = 0.0;
  NetworkParams<T> grad;
};

/// Cross-entropy summed over both heads and all pixels (divided by H*W in
/// mean mode) and its exact gradient.
template <typename T>
LossGrad<T> loss_and_grad(const NetworkParams<T>& params, const Image& y, const MotionFlow& m, LossMode mode);

/// ReLU on/off bits and pooling winners of a forward pass. Two parameter
/// sets with equal patterns lie in the same piecewise-smooth region.
template <typename T>
std::vector<std::int32_t> activation_pattern(const NetworkParams<T>& params, const Image& y);

/// v <- momentum v - lr g; p <- p + v.
template <typename T>
void sgd_step(NetworkParams<T>& params, const NetworkParams<T>& grad, NetworkParams<T>& velocity, double lr,
              double momentum);

/// Per-pixel argmax of each head (lowest label wins ties). Inputs whose size
/// is not a multiple of the stride are replicate-padded and cropped back.
template <typename T>
MotionFlow estimate_flow(const NetworkParams<T>& params, const Image& y, const FlowDomain& dom);

/// Replicate-pads bottom and right edges to the next multiple of `stride`.
Image pad_to_multiple(const Image& y, int stride);

}  // namespace mfd::net
