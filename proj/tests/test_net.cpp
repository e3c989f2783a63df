#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mfd/blur.hpp"
#include "mfd/flowsim.hpp"
#include "mfd/metrics.hpp"
#include "mfd/net/checkpoint.hpp"
#include "mfd/net/train.hpp"
#include "mfd/random.hpp"
#include "mfd/synth.hpp"
#include "fd_check.hpp"
#include "support.hpp"

using namespace mfd;
using namespace mfd::net;
using namespace mfd::testing;

namespace {

// A small architecture: conv 3x3 (ReLU) -> conv 1x1 -> soft-max.
ArchSpec three_layer_arch(const FlowDomain& dom) {
  ArchSpec a;
  a.domain = dom;
  const int d = dom.label_count();
  a.layers = {
      {LayerKind::conv, "c1", 3, 3, 4, 1, -1, true, 0},
      {LayerKind::conv, "c2", 1, 4, d, 1, -1, false, 0},
      {LayerKind::softmax_split, "sm", 1, d, d, 1, -1, false, dom.u_count()},
  };
  a.validate();
  return a;
}

Image shifted_crop(const Image& big, int r0, int c0, int h, int w) { return big.crop(r0, c0, h, w); }

}  // namespace

TEST_CASE("architecture presets") {
  const FlowDomain dom(8, 8);
  const ArchSpec paper = paper_arch(dom);
  int convs = 0, pools = 0, ups = 0;
  for (const auto& l : paper.layers) {
    convs += l.kind == LayerKind::conv;
    pools += l.kind == LayerKind::maxpool;
    ups += l.kind == LayerKind::upconv;
  }
  CHECK(convs == 7);
  CHECK(pools == 4);
  CHECK(ups == 3);
  CHECK(paper.stride() == 16);
  CHECK(paper.output_channels() == 26);
  CHECK(paper.layers[0].in_channels == 3);
  CHECK(paper.layers[0].out_channels == 64);
  CHECK(toy_arch(dom).layers[0].out_channels == 32);
  CHECK(paper.digest() != toy_arch(dom).digest());
  CHECK(arch_from_json(nlohmann::json(paper)) == paper);
  CHECK_THROWS_AS(preset_arch("huge", dom), ParameterError);

  ArchSpec bad = paper;
  bad.layers[12].skip_from = 4;  // pool2 features are at the wrong resolution here
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = paper;
  bad.layers[15].factor = 2;  // upsampling no longer undoes pooling
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = paper;
  bad.layers.back().split = 5;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("init: bilinear upconv kernels, zero biases, determinism") {
  const FlowDomain dom(8, 8);
  const ArchSpec arch = toy_arch(dom);
  const auto p = init_params<double>(arch, 42);
  p.check_shapes();
  for (std::size_t k = 0; k < arch.layers.size(); ++k) {
    CHECK(p.layers[k].bias.isZero(0.0));
    const LayerSpec& l = arch.layers[k];
    if (l.kind != LayerKind::upconv) continue;
    const int f = l.factor;
    const int kk = 2 * f;
    const double c = f - 0.5;
    for (int ci = 0; ci < l.in_channels; ++ci)
      for (int co = 0; co < l.out_channels; ++co)
        for (int a = 0; a < kk; ++a)
          for (int b = 0; b < kk; ++b) {
            const double expect = ci == co ? (1 - std::abs(a - c) / f) * (1 - std::abs(b - c) / f) : 0.0;
            CHECK(p.layers[k].weight(ci, (co * kk + a) * kk + b) == doctest::Approx(expect).epsilon(1e-15));
          }
  }
  // Factor 2: outer product of (1/4, 3/4, 3/4, 1/4); the centre taps are 9/16.
  const auto& w2 = p.layers[11].weight;
  CHECK(w2(0, 1 * 4 + 1) == 0.5625);
  CHECK(w2(0, 2 * 4 + 2) == 0.5625);
  CHECK(w2(0, 0) == 0.0625);
  CHECK(w2.row(0).segment(0, 16).sum() == doctest::Approx(4.0));

  const auto q = init_params<double>(arch, 42);
  const auto r = init_params<double>(arch, 43);
  for (std::size_t k = 0; k < arch.layers.size(); ++k) CHECK(p.layers[k].weight == q.layers[k].weight);
  CHECK(p.layers[0].weight != r.layers[0].weight);
}

TEST_CASE("bilinear upconv interpolates a constant plane in the interior") {
  Feature<double> x(1, 4, 4);
  x.data.setConstant(2.0);
  Mat<double> w(1, 16);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) w(0, a * 4 + b) = bilinear_weight(a, 2) * bilinear_weight(b, 2);
  const Feature<double> y = upconv_forward(x, w, 2);
  CHECK(y.height == 8);
  CHECK(y.width == 8);
  for (int r = 1; r < 7; ++r)
    for (int c = 1; c < 7; ++c) CHECK(y.data(0, r * 8 + c) == doctest::Approx(2.0));
}

TEST_CASE("gradient: conv layer") {
  Rng rng(1);
  for (const bool relu : {false, true})
    for (const int k : {1, 3, 5}) {
      Feature<double> x = random_feature(2, 6, 5, rng);
      Mat<double> w = random_mat(3, 2 * k * k, rng);
      Vec<double> b = random_vec(3, rng);
      const Mat<double> probe = random_mat(3, 30, rng);
      const auto loss = [&] { return dot(conv_forward(x, w, b, k, relu).data, probe); };
      const Feature<double> y = conv_forward(x, w, b, k, relu);
      Mat<double> dw;
      Vec<double> db;
      Feature<double> dx;
      conv_backward(x, y, w, k, relu, probe, dw, db, &dx);
      CAPTURE(k);
      CAPTURE(relu);
      CHECK(max_fd_error(x.data, dx.data, loss) <= kRelTol);
      CHECK(max_fd_error(w, dw, loss) <= kRelTol);
      CHECK(max_fd_error_vec(b, db, loss) <= kRelTol);
    }
}

TEST_CASE("gradient: max pooling") {
  Rng rng(2);
  Feature<double> x = random_feature(3, 6, 8, rng);
  const Mat<double> probe = random_mat(3, 12, rng);
  std::vector<int> idx;
  const auto loss = [&] {
    std::vector<int> tmp;
    return dot(maxpool_forward(x, tmp).data, probe);
  };
  const Feature<double> y = maxpool_forward(x, idx);
  Feature<double> dy = y;
  dy.data = probe;
  Feature<double> dx(3, 6, 8);
  maxpool_backward(dy, idx, dx);
  CHECK(max_fd_error(x.data, dx.data, loss) <= kRelTol);
  CHECK_THROWS_AS(maxpool_forward(random_feature(1, 5, 4, rng), idx), ShapeError);
}

TEST_CASE("gradient: upconv") {
  Rng rng(3);
  for (const int f : {2, 4}) {
    const int k = 2 * f;
    Feature<double> x = random_feature(2, 3, 4, rng);
    Mat<double> w = random_mat(2, 3 * k * k, rng);
    const Mat<double> probe = random_mat(3, 12L * f * f, rng);
    const auto loss = [&] { return dot(upconv_forward(x, w, f).data, probe); };
    Feature<double> dy = upconv_forward(x, w, f);
    dy.data = probe;
    Mat<double> dw;
    Feature<double> dx;
    upconv_backward(x, w, f, dy, dw, dx);
    CAPTURE(f);
    CHECK(max_fd_error(x.data, dx.data, loss) <= kRelTol);
    CHECK(max_fd_error(w, dw, loss) <= kRelTol);
  }
}

TEST_CASE("gradient: skip projection") {
  Rng rng(4);
  Feature<double> x = random_feature(3, 4, 4, rng);
  Feature<double> src = random_feature(5, 4, 4, rng);
  Mat<double> w = random_mat(3, 5, rng);
  Vec<double> b = random_vec(3, rng);
  const Mat<double> probe = random_mat(3, 16, rng);
  const auto loss = [&] { return dot(skip_forward(x, src, w, b).data, probe); };
  Mat<double> dw, dsrc;
  Vec<double> db;
  skip_backward(src, w, probe, dw, db, dsrc);
  CHECK(max_fd_error(x.data, probe, loss) <= kRelTol);  // identity path
  CHECK(max_fd_error(src.data, dsrc, loss) <= kRelTol);
  CHECK(max_fd_error(w, dw, loss) <= kRelTol);
  CHECK(max_fd_error_vec(b, db, loss) <= kRelTol);
}

TEST_CASE("gradient: soft-max cross-entropy") {
  Rng rng(5);
  Mat<double> logits = random_mat(7, 10, rng, 3.0);
  std::vector<int> lu(10), lv(10);
  for (int k = 0; k < 10; ++k) {
    lu[k] = k % 3;
    lv[k] = (3 * k) % 4;
  }
  const auto loss = [&] {
    return softmax_ce<double>(logits, 0, 3, lu, 0.5, nullptr) + softmax_ce<double>(logits, 3, 4, lv, 0.5, nullptr);
  };
  Mat<double> g = Mat<double>::Zero(7, 10);
  softmax_ce(logits, 0, 3, lu, 0.5, &g);
  softmax_ce(logits, 3, 4, lv, 0.5, &g);
  // The returned loss is unscaled, the gradient carries the scale.
  CHECK(max_fd_error(logits, Mat<double>(2.0 * g), loss) <= kRelTol);
  std::vector<int> bad = lu;
  bad[0] = 3;
  CHECK_THROWS_AS(softmax_ce<double>(logits, 0, 3, bad, 1.0, nullptr), DomainError);
}


TEST_CASE("gradient: three-layer network on 16x16") {
  const FlowDomain dom(2, 1);
  Rng rng(6);
  const Image y = testing::random_image(16, 16, 3, rng);
  const MotionFlow m = testing::random_flow(16, 16, 2, 1, rng);
  for (const LossMode mode : {LossMode::sum, LossMode::mean}) {
    NetworkParams<double> p = init_params<double>(three_layer_arch(dom), 9);
    for (auto& l : p.layers) l.bias = Vec<double>::Random(l.bias.size()) * 0.1;
    const FdOutcome fd = network_fd(p, y, m, mode, 0, rng);
    CHECK(fd.worst <= kRelTol);
    CHECK(fd.skipped * 10 <= fd.probes);
  }
}

TEST_CASE("gradient: full toy network on 16x16") {
  const FlowDomain dom(8, 8);
  Rng rng(7);
  const Image y = testing::random_image(16, 16, 3, rng);
  const MotionFlow m = testing::random_flow(16, 16, 8, 8, rng);
  NetworkParams<double> p = init_params<double>(toy_arch(dom), 3);
  for (auto& l : p.layers) l.bias = Vec<double>::Random(l.bias.size()) * 0.05;
  const FdOutcome fd = network_fd(p, y, m, LossMode::sum, 16, rng);
  MESSAGE("toy network: " << fd.probes << " probes, " << fd.skipped << " across kinks, max rel error " << fd.worst);
  CHECK(fd.worst <= kRelTol);
  CHECK(fd.skipped * 4 <= fd.probes);
  CHECK(fd.probes - fd.skipped >= 200);
}

TEST_CASE("forward: shapes, normalization, uniform heads") {
  const FlowDomain dom(8, 8);
  Rng rng(8);
  const Image y = testing::random_image(64, 64, 3, rng);
  auto p = init_params<float>(toy_arch(dom), 1);
  const Prediction<float> pred = forward(p, y);
  CHECK(pred.pu.rows() == 9);
  CHECK(pred.pv.rows() == 17);
  CHECK(pred.pu.cols() == 64 * 64);
  CHECK(pred.height == 64);
  CHECK(pred.width == 64);
  CHECK((pred.pu.array() >= 0).all());
  CHECK((pred.pv.array() >= 0).all());
  CHECK(((pred.pu.colwise().sum().array() - 1).abs() <= 1e-5f).all());
  CHECK(((pred.pv.colwise().sum().array() - 1).abs() <= 1e-5f).all());

  auto zero = p.zeros_like();
  const Prediction<float> flat = forward(zero, y);
  CHECK(((flat.pu.array() - 1.0f / 9).abs() <= 1e-7f).all());
  CHECK(((flat.pv.array() - 1.0f / 17).abs() <= 1e-7f).all());

  try {
    forward(p, testing::random_image(40, 64, 3, rng));
    FAIL("indivisible size accepted");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("16") != std::string::npos);
  }
}

TEST_CASE("loss: analytic values") {
  const FlowDomain dom(1, 1);
  ArchSpec arch;
  arch.domain = dom;
  arch.layers = {{LayerKind::conv, "c", 1, 3, 5, 1, -1, false, 0},
                 {LayerKind::softmax_split, "sm", 1, 5, 5, 1, -1, false, 2}};
  arch.validate();
  auto p = init_params<double>(arch, 0).zeros_like();
  const Image y(1, 1, 3, 0.3);
  MotionFlow m(1, 1);
  m.set(0, 0, {1, -1});
  CHECK(loss_and_grad(p, y, m, LossMode::sum).loss == doctest::Approx(std::log(2.0) + std::log(3.0)).epsilon(1e-12));
  CHECK(std::log(2.0) + std::log(3.0) == doctest::Approx(1.7918).epsilon(1e-4));

  // Large margin on the correct labels drives the loss to zero.
  const LabelPair lab = label_of({1, -1}, dom);
  p.layers[0].bias[lab.u_label] = 60.0;
  p.layers[0].bias[lab.v_label] = 60.0;
  CHECK(loss_and_grad(p, y, m, LossMode::sum).loss < 1e-20);

  MotionFlow outside(1, 1);
  outside.set(0, 0, {2, 0});
  CHECK_THROWS_AS(loss_and_grad(p, y, outside, LossMode::sum), DomainError);
}

TEST_CASE("loss: mean mode divides the summed loss by H*W") {
  const FlowDomain dom(2, 1);
  Rng rng(9);
  const Image y = testing::random_image(8, 8, 3, rng);
  const MotionFlow m = testing::random_flow(8, 8, 2, 1, rng);
  const auto p = init_params<double>(three_layer_arch(dom), 4);
  const auto s = loss_and_grad(p, y, m, LossMode::sum);
  const auto a = loss_and_grad(p, y, m, LossMode::mean);
  CHECK(a.loss == doctest::Approx(s.loss / 64).epsilon(1e-12));
  CHECK(a.grad.layers[0].weight.isApprox(s.grad.layers[0].weight / 64, 1e-12));
}

TEST_CASE("sgd step recurrence") {
  const FlowDomain dom(1, 1);
  const auto base = init_params<double>(three_layer_arch(dom), 1);
  Rng rng(10);
  auto grad = base.zeros_like();
  for (auto& l : grad.layers) {
    l.weight = random_mat(l.weight.rows(), l.weight.cols(), rng);
    l.bias = random_vec(l.bias.size(), rng);
  }

  auto p = base;
  auto v = base.zeros_like();
  sgd_step(p, grad, v, 0.1, 0.0);
  CHECK(p.layers[0].weight.isApprox(base.layers[0].weight - 0.1 * grad.layers[0].weight, 1e-14));

  p = base;
  v = base.zeros_like();
  sgd_step(p, base.zeros_like(), v, 0.5, 0.9);
  CHECK(p.layers[0].weight == base.layers[0].weight);
  CHECK(p.layers[1].bias == base.layers[1].bias);

  p = base;
  v = base.zeros_like();
  sgd_step(p, grad, v, 1.0, 0.9);
  sgd_step(p, grad, v, 1.0, 0.9);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    CHECK((p.layers[k].weight - base.layers[k].weight).isApprox(-2.9 * grad.layers[k].weight, 1e-12));
    CHECK((p.layers[k].bias - base.layers[k].bias).isApprox(-2.9 * grad.layers[k].bias, 1e-12));
  }
}

TEST_CASE("estimate_flow: padding, tie-break, domain closure") {
  const FlowDomain dom(8, 8);
  Rng rng(11);
  const ArchSpec arch = toy_arch(dom);
  const Image odd = testing::random_image(37, 50, 3, rng);

  const auto zero = init_params<float>(arch, 0).zeros_like();
  const MotionFlow tied = estimate_flow(zero, odd, dom);
  CHECK(tied.height() == 37);
  CHECK(tied.width() == 50);
  CHECK((tied.u() == 0).all());
  CHECK((tied.v() == -8).all());

  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto p = init_params<float>(arch, seed);
    for (auto& l : p.layers) l.bias = Vec<float>::Random(l.bias.size()) * 3.0f;
    const MotionFlow est = estimate_flow(p, testing::random_image(32, 48, 3, rng), dom);
    CHECK(est.in_domain(dom));
  }
  CHECK_THROWS_AS(estimate_flow(zero, odd, FlowDomain(4, 4)), ParameterError);
}

TEST_CASE("translation covariance") {
  const FlowDomain dom(8, 8);
  Rng rng(12);
  const Image big = testing::random_image(160, 160, 3, rng);
  const auto p = init_params<double>(toy_arch(dom), 5);
  const Feature<double> a = forward_logits(p, shifted_crop(big, 0, 0, 128, 128));
  const Feature<double> b = forward_logits(p, shifted_crop(big, 16, 16, 128, 128));
  // b(r, c) sees the same input as a(r + 16, c + 16); compare away from the borders.
  double worst = 0.0, scale = 0.0;
  for (int r = 48; r < 64; ++r)
    for (int c = 48; c < 64; ++c)
      for (int ch = 0; ch < a.channels(); ++ch) {
        const double va = a.data(ch, (r + 16) * 128 + c + 16);
        worst = std::max(worst, std::abs(va - b.data(ch, r * 128 + c)));
        scale = std::max(scale, std::abs(va));
      }
  CHECK(scale > 0.0);
  CHECK(worst <= 1e-9 * std::max(1.0, scale));
}

TEST_CASE("checkpoint round trip and refusal") {
  const FlowDomain dom(8, 8);
  const ArchSpec arch = toy_arch(dom);
  const auto p = init_params<float>(arch, 17);
  const auto bytes = encode_checkpoint(p);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MFNN");
  const auto q = decode_checkpoint(bytes, &arch);
  CHECK(q.arch == arch);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    CHECK(q.layers[k].weight == p.layers[k].weight);
    CHECK(q.layers[k].bias == p.layers[k].bias);
  }
  CHECK(encode_checkpoint(q) == bytes);

  const ArchSpec other = paper_arch(dom);
  CHECK_THROWS_AS(decode_checkpoint(bytes, &other), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad[10] ^= 1;  // digest byte
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);

  testing::TempDir dir;
  save_checkpoint(p, dir.path() / "net.mfnn");
  CHECK(encode_checkpoint(load_checkpoint(dir.path() / "net.mfnn")) == bytes);
}

TEST_CASE("train: configuration validation") {
  TrainConfig c;
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = TrainConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = TrainConfig{};
  c.lr_step = 7;
  c.mode = LossMode::sum;
  CHECK(train_config_from_json(nlohmann::json(c)) == c);
  CHECK_THROWS_AS(train_config_from_json({{"learning_rate", 1.0}}), ParameterError);
  CHECK_THROWS_AS(train({}, toy_arch(FlowDomain(8, 8)), TrainConfig{}), ParameterError);
}

TEST_CASE("train: deterministic given the seed") {
  const FlowDomain dom(4, 4);
  Rng rng(13);
  std::vector<TrainSample> data;
  for (int k = 0; k < 3; ++k) {
    const Image x = synth_scene(32, 32, rng);
    const MotionFlow m = testing::random_flow(32, 32, 4, 4, rng);
    data.push_back({apply_blur(x, m), m});
  }
  TrainConfig c;
  c.lr = 1e-2;
  c.epochs = 3;
  c.seed = 5;
  c.batch_size = 2;
  const auto a = train(data, toy_arch(dom), c);
  const auto b = train(data, toy_arch(dom), c);
  CHECK(a.iterations == 6);
  CHECK(a.loss == b.loss);
  CHECK(encode_checkpoint(a.params) == encode_checkpoint(b.params));
  c.seed = 6;
  CHECK(train(data, toy_arch(dom), c).loss != a.loss);
}

TEST_CASE("train: divergence keeps the last finite parameters") {
  const FlowDomain dom(4, 4);
  Rng rng(14);
  const Image x = synth_scene(32, 32, rng);
  const MotionFlow m = testing::random_flow(32, 32, 4, 4, rng);
  TrainConfig c;
  c.lr = 1e30;
  c.momentum = 0.0;
  c.epochs = 50;
  const auto r = train({{apply_blur(x, m), m}}, toy_arch(dom), c);
  CHECK(r.diverged);
  CHECK(r.stop_reason == "diverged");
  CHECK(r.params.all_finite());
  CHECK(r.iterations < 50);
}

TEST_CASE("train: memorizes a single 64x64 pair") {
  const FlowDomain dom(8, 8);
  Rng rng(15);
  const Image x = synth_scene(64, 64, rng);
  const MotionFlow m = simulate_flow_indexed(64, 64, dom, SimConfig::defaults(dom), 3);
  const Image y = apply_blur(x, m);
  TrainConfig c;
  c.lr = 1e-2;
  c.momentum = 0.95;  // 0.9 overshoots once around iteration 50
  c.epochs = 500;
  c.seed = 2;
  c.mode = LossMode::mean;
  const auto r = train({{y, m}}, toy_arch(dom), c);
  REQUIRE(r.loss.size() == 500);
  const double mse = flow_mse(estimate_flow(r.params, y, dom), m);
  MESSAGE("memorization flow MSE " << mse << ", final loss " << r.loss.back());
  CHECK(mse < 0.5);
  std::vector<double> window;
  for (std::size_t k = 0; k + 10 <= r.loss.size(); k += 10)
    window.push_back(std::accumulate(r.loss.begin() + k, r.loss.begin() + k + 10, 0.0) / 10.0);
  for (std::size_t k = 1; k < window.size(); ++k) {
    CAPTURE(k);
    CHECK(window[k] <= window[k - 1]);
  }
}
