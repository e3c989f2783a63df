#include "mfd/net/network.hpp"

#include <cmath>
#include <random>

#include "mfd/errors.hpp"
#include "mfd/random.hpp"

namespace mfd::net {

TensorShape layer_shape(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::conv:
      return {l.out_channels, static_cast<long>(l.in_channels) * l.kernel * l.kernel, l.out_channels};
    case LayerKind::upconv:
      return {l.in_channels, static_cast<long>(l.out_channels) * l.kernel * l.kernel, 0};
    case LayerKind::skip_add:
      return {l.out_channels, 0, l.out_channels};  // cols depend on the source layer
    default:
      return {0, 0, 0};
  }
}

namespace {

// Channel count produced by each layer.
std::vector<int> output_channels(const ArchSpec& arch) {
  std::vector<int> ch;
  for (const auto& l : arch.layers) ch.push_back(l.out_channels);
  return ch;
}

TensorShape full_shape(const ArchSpec& arch, std::size_t k) {
  TensorShape s = layer_shape(arch.layers[k]);
  if (arch.layers[k].kind == LayerKind::skip_add) s.cols = output_channels(arch)[arch.layers[k].skip_from];
  return s;
}

}  // namespace

template <typename T>
NetworkParams<T> NetworkParams<T>::zeros_like() const {
  NetworkParams out;
  out.arch = arch;
  for (const auto& l : layers)
    out.layers.push_back({Mat<T>::Zero(l.weight.rows(), l.weight.cols()), Vec<T>::Zero(l.bias.size())});
  return out;
}

template <typename T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <typename T>
bool NetworkParams<T>::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

template <typename T>
void NetworkParams<T>::check_shapes() const {
  if (layers.size() != arch.layers.size()) throw ShapeError("network params: layer count differs from architecture");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const TensorShape s = full_shape(arch, k);
    if (layers[k].weight.rows() != s.rows || layers[k].weight.cols() != s.cols || layers[k].bias.size() != s.bias)
      throw ShapeError("network params: tensor shape mismatch at layer " + std::to_string(k) + " (" +
                       arch.layers[k].name + ")");
  }
}

template <typename T>
NetworkParams<T> init_params(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  NetworkParams<double> p;
  p.arch = arch;
  for (std::size_t k = 0; k < arch.layers.size(); ++k) {
    const LayerSpec& l = arch.layers[k];
    const TensorShape s = full_shape(arch, k);
    LayerParams<double> lp{Mat<double>::Zero(s.rows, s.cols), Vec<double>::Zero(s.bias)};
    Rng rng(derive_seed(seed, {k}));
    if (l.kind == LayerKind::conv || l.kind == LayerKind::skip_add) {
      const double fan_in = static_cast<double>(s.cols);
      const double limit = std::sqrt((l.relu ? 6.0 : 3.0) / fan_in);
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < lp.weight.size(); ++i) lp.weight.data()[i] = dist(rng);
    } else if (l.kind == LayerKind::upconv) {
      const int kk = l.kernel;
      for (int c = 0; c < std::min(l.in_channels, l.out_channels); ++c)
        for (int ky = 0; ky < kk; ++ky)
          for (int kx = 0; kx < kk; ++kx)
            lp.weight(c, (static_cast<Eigen::Index>(c) * kk + ky) * kk + kx) =
                bilinear_weight(ky, l.factor) * bilinear_weight(kx, l.factor);
    }
    p.layers.push_back(std::move(lp));
  }
  return p.cast<T>();
}

template <typename T>
Feature<T> to_input(const Image& y) {
  Feature<T> x(3, y.height(), y.width());
  for (int c = 0; c < 3; ++c) {
    const auto& plane = y.plane(y.channels() == 3 ? c : 0);
    for (Eigen::Index k = 0; k < plane.size(); ++k) x.data(c, k) = static_cast<T>(plane.data()[k] - 0.5);
  }
  return x;
}

namespace {

template <typename T>
struct Trace {
  std::vector<Feature<T>> out;
  std::vector<std::vector<int>> argmax;
};

void check_input(const ArchSpec& arch, const Image& y) {
  const int s = arch.stride();
  if (y.empty()) throw ShapeError("network input is empty");
  if (y.height() % s != 0 || y.width() % s != 0)
    throw ShapeError("network input " + std::to_string(y.height()) + "x" + std::to_string(y.width()) +
                     " must have height and width divisible by " + std::to_string(s));
}

template <typename T>
Trace<T> run_forward(const NetworkParams<T>& params, const Feature<T>& x) {
  const ArchSpec& arch = params.arch;
  Trace<T> tr;
  tr.out.resize(arch.layers.size());
  tr.argmax.resize(arch.layers.size());
  for (std::size_t k = 0; k < arch.layers.size(); ++k) {
    const LayerSpec& l = arch.layers[k];
    const Feature<T>& in = k == 0 ? x : tr.out[k - 1];
    const LayerParams<T>& p = params.layers[k];
    switch (l.kind) {
      case LayerKind::conv: tr.out[k] = conv_forward(in, p.weight, p.bias, l.kernel, l.relu); break;
      case LayerKind::maxpool: tr.out[k] = maxpool_forward(in, tr.argmax[k]); break;
      case LayerKind::upconv: tr.out[k] = upconv_forward(in, p.weight, l.factor); break;
      case LayerKind::skip_add:
        tr.out[k] = skip_forward(in, tr.out[static_cast<std::size_t>(l.skip_from)], p.weight, p.bias);
        break;
      case LayerKind::softmax_split: tr.out[k] = in; break;
    }
  }
  return tr;
}

}  // namespace

template <typename T>
Feature<T> forward_logits(const NetworkParams<T>& params, const Image& y) {
  check_input(params.arch, y);
  params.check_shapes();
  return std::move(run_forward(params, to_input<T>(y)).out.back());
}

template <typename T>
Prediction<T> forward(const NetworkParams<T>& params, const Image& y) {
  const Feature<T> logits = forward_logits(params, y);
  const FlowDomain& dom = params.arch.domain;
  Prediction<T> pred;
  pred.pu = softmax_rows(logits.data, 0, dom.u_count());
  pred.pv = softmax_rows(logits.data, dom.u_count(), dom.v_count());
  pred.height = logits.height;
  pred.width = logits.width;
  return pred;
}

template <typename T>
LossGrad<T> loss_and_grad(const NetworkParams<T>& params, const Image& y, const MotionFlow& m, LossMode mode) {
  check_input(params.arch, y);
  params.check_shapes();
  if (m.height() != y.height() || m.width() != y.width()) throw ShapeError("loss: image and flow sizes differ");
  const FlowDomain& dom = params.arch.domain;
  m.require_domain(dom);

  const Feature<T> x = to_input<T>(y);
  Trace<T> tr = run_forward(params, x);
  const std::size_t n = static_cast<std::size_t>(y.height()) * y.width();
  std::vector<int> lu(n), lv(n);
  for (std::size_t k = 0; k < n; ++k) {
    lu[k] = m.u().data()[k];
    lv[k] = v_head_index(m.v().data()[k], dom);
  }
  const double scale = mode == LossMode::mean ? 1.0 / static_cast<double>(n) : 1.0;

  const std::size_t last = params.arch.layers.size() - 1;
  std::vector<Mat<T>> dout(params.arch.layers.size());
  const Mat<T>& logits = tr.out[last].data;
  dout[last] = Mat<T>::Zero(logits.rows(), logits.cols());
  LossGrad<T> res;
  res.loss = scale * (softmax_ce(logits, 0, dom.u_count(), lu, scale, &dout[last]) +
                      softmax_ce(logits, dom.u_count(), dom.v_count(), lv, scale, &dout[last]));
  res.grad = params.zeros_like();

  // Reverse sweep; dout[k] accumulates dL/d(output of layer k).
  for (std::size_t k = last + 1; k-- > 0;) {
    const LayerSpec& l = params.arch.layers[k];
    const Feature<T>& in = k == 0 ? x : tr.out[k - 1];
    const LayerParams<T>& p = params.layers[k];
    LayerParams<T>& g = res.grad.layers[k];
    Mat<T>& dy = dout[k];
    const auto pass_down = [&](Mat<T>&& d) {
      if (k == 0) return;
      if (dout[k - 1].size() == 0)
        dout[k - 1] = std::move(d);
      else
        dout[k - 1] += d;
    };
    switch (l.kind) {
      case LayerKind::conv: {
        Feature<T> dx;
        conv_backward(in, tr.out[k], p.weight, l.kernel, l.relu, std::move(dy), g.weight, g.bias,
                      k == 0 ? nullptr : &dx);
        pass_down(std::move(dx.data));
        break;
      }
      case LayerKind::maxpool: {
        Feature<T> dyf;
        dyf.data = std::move(dy);
        dyf.height = tr.out[k].height;
        dyf.width = tr.out[k].width;
        Feature<T> dx(in.channels(), in.height, in.width);
        maxpool_backward(dyf, tr.argmax[k], dx);
        pass_down(std::move(dx.data));
        break;
      }
      case LayerKind::upconv: {
        Feature<T> dyf;
        dyf.data = std::move(dy);
        dyf.height = tr.out[k].height;
        dyf.width = tr.out[k].width;
        Feature<T> dx;
        upconv_backward(in, p.weight, l.factor, dyf, g.weight, dx);
        pass_down(std::move(dx.data));
        break;
      }
      case LayerKind::skip_add: {
        const auto src = static_cast<std::size_t>(l.skip_from);
        Mat<T> dsrc;
        skip_backward(tr.out[src], p.weight, dy, g.weight, g.bias, dsrc);
        if (dout[src].size() == 0)
          dout[src] = std::move(dsrc);
        else
          dout[src] += dsrc;
        pass_down(std::move(dy));
        break;
      }
      case LayerKind::softmax_split: pass_down(std::move(dy)); break;
    }
    dy.resize(0, 0);
  }
  return res;
}

template <typename T>
std::vector<std::int32_t> activation_pattern(const NetworkParams<T>& params, const Image& y) {
  check_input(params.arch, y);
  params.check_shapes();
  const Trace<T> tr = run_forward(params, to_input<T>(y));
  std::vector<std::int32_t> pattern;
  for (std::size_t k = 0; k < params.arch.layers.size(); ++k) {
    const LayerSpec& l = params.arch.layers[k];
    if (l.kind == LayerKind::conv && l.relu)
      for (Eigen::Index i = 0; i < tr.out[k].data.size(); ++i) pattern.push_back(tr.out[k].data.data()[i] > T(0));
    else if (l.kind == LayerKind::maxpool)
      pattern.insert(pattern.end(), tr.argmax[k].begin(), tr.argmax[k].end());
  }
  return pattern;
}

template <typename T>
void sgd_step(NetworkParams<T>& params, const NetworkParams<T>& grad, NetworkParams<T>& velocity, double lr,
              double momentum) {
  if (grad.layers.size() != params.layers.size() || velocity.layers.size() != params.layers.size())
    throw ShapeError("sgd: parameter structures differ");
  const T mu = static_cast<T>(momentum);
  const T eta = static_cast<T>(lr);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& p = params.layers[k];
    auto& v = velocity.layers[k];
    const auto& g = grad.layers[k];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() || g.bias.size() != p.bias.size() ||
        v.weight.rows() != p.weight.rows() || v.weight.cols() != p.weight.cols() || v.bias.size() != p.bias.size())
      throw ShapeError("sgd: tensor shapes differ at layer " + std::to_string(k));
    v.weight = mu * v.weight - eta * g.weight;
    v.bias = mu * v.bias - eta * g.bias;
    p.weight += v.weight;
    p.bias += v.bias;
  }
}

Image pad_to_multiple(const Image& y, int stride) {
  const int h = (y.height() + stride - 1) / stride * stride;
  const int w = (y.width() + stride - 1) / stride * stride;
  if (h == y.height() && w == y.width()) return y;
  std::vector<Plane<double>> planes;
  for (const auto& p : y.planes()) {
    Plane<double> q(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) q(r, c) = p(std::min(r, y.height() - 1), std::min(c, y.width() - 1));
    planes.push_back(std::move(q));
  }
  return Image::from_planes(std::move(planes));
}

template <typename T>
MotionFlow estimate_flow(const NetworkParams<T>& params, const Image& y, const FlowDomain& dom) {
  if (!(dom == params.arch.domain)) throw ParameterError("estimate_flow: flow domain differs from the network's");
  const Image padded = pad_to_multiple(y, params.arch.stride());
  const Feature<T> logits = forward_logits(params, padded);
  MotionFlow flow(y.height(), y.width());
  const int du = dom.u_count();
  const int dv = dom.v_count();
  for (int r = 0; r < y.height(); ++r)
    for (int c = 0; c < y.width(); ++c) {
      const Eigen::Index col = static_cast<Eigen::Index>(r) * padded.width() + c;
      int bu = 0, bv = 0;
      for (int a = 1; a < du; ++a)
        if (logits.data(a, col) > logits.data(bu, col)) bu = a;
      for (int b = 1; b < dv; ++b)
        if (logits.data(du + b, col) > logits.data(du + bv, col)) bv = b;
      flow.set(r, c, {bu, bv - dom.v_max()});
    }
  return flow;
}

#define MFD_INSTANTIATE(T)                                                                                   \
  template struct NetworkParams<T>;                                                                         \
  template NetworkParams<T> init_params(const ArchSpec&, std::uint64_t);                                    \
  template Feature<T> to_input(const Image&);                                                               \
  template Feature<T> forward_logits(const NetworkParams<T>&, const Image&);                                \
  template Prediction<T> forward(const NetworkParams<T>&, const Image&);                                    \
  template LossGrad<T> loss_and_grad(const NetworkParams<T>&, const Image&, const MotionFlow&, LossMode);   \
  template std::vector<std::int32_t> activation_pattern(const NetworkParams<T>&, const Image&);           \
  template void sgd_step(NetworkParams<T>&, const NetworkParams<T>&, NetworkParams<T>&, double, double);    \
  template MotionFlow estimate_flow(const NetworkParams<T>&, const Image&, const FlowDomain&);

MFD_INSTANTIATE(float)
MFD_INSTANTIATE(double)

#undef MFD_INSTANTIATE

}  // namespace mfd::net
