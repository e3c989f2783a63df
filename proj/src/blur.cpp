#include "mfd/blur.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include "mfd/parallel.hpp"

namespace mfd {

namespace {

constexpr double kPruneMass = 1e-8;

// Parameters t in (0,1) where a + t*d crosses a cell boundary k + 1/2.
void boundary_crossings(double a, double d, std::vector<double>& ts) {
  if (d == 0.0) return;
  const double lo = std::min(a, a + d);
  const double hi = std::max(a, a + d);
  for (double k = std::floor(lo - 0.5); k <= std::ceil(hi + 0.5); k += 1.0) {
    const double t = (k + 0.5 - a) / d;
    if (t > 0.0 && t < 1.0) ts.push_back(t);
  }
}

}  // namespace

int LinearKernel::radius() const {
  int r = 0;
  for (const auto& t : taps) r = std::max({r, std::abs(t.di), std::abs(t.dj)});
  return r;
}

double LinearKernel::mass() const {
  double s = 0.0;
  for (const auto& t : taps) s += t.w;
  return s;
}

LinearKernel rasterize_kernel(double u, double v) {
  // m and -m trace the same segment; rasterize the canonical one so both
  // produce bit-identical taps.
  if (u < 0.0 || (u == 0.0 && v < 0.0)) {
    u = -u;
    v = -v;
  }
  if (std::hypot(u, v) == 0.0) return {{{0, 0, 1.0}}};

  const double ax = -0.5 * u;
  const double ay = -0.5 * v;
  std::vector<double> ts{0.0, 1.0};
  boundary_crossings(ax, u, ts);
  boundary_crossings(ay, v, ts);
  std::sort(ts.begin(), ts.end());

  std::map<std::pair<int, int>, double> mass;  // (dj, di) -> covered fraction
  for (std::size_t k = 1; k < ts.size(); ++k) {
    const double dt = ts[k] - ts[k - 1];
    if (dt <= 0.0) continue;
    const double tm = 0.5 * (ts[k] + ts[k - 1]);
    const int di = static_cast<int>(std::floor(ax + tm * u + 0.5));
    const int dj = static_cast<int>(std::floor(ay + tm * v + 0.5));
    mass[{dj, di}] += dt;
  }

  // Enforce exact central symmetry; the segment is symmetric about the origin.
  std::map<std::pair<int, int>, double> sym;
  for (const auto& [key, w] : mass) {
    const auto mirror = std::make_pair(-key.first, -key.second);
    const auto it = mass.find(mirror);
    sym[key] = 0.5 * (w + (it == mass.end() ? 0.0 : it->second));
    if (it == mass.end()) sym[mirror] = sym[key];
  }

  LinearKernel k;
  double total = 0.0;
  for (const auto& [key, w] : sym)
    if (w >= kPruneMass) total += w;
  for (const auto& [key, w] : sym)
    if (w >= kPruneMass) k.taps.push_back({key.second, key.first, w / total});
  return k;
}

std::shared_ptr<const LinearKernel> KernelCache::get(Motion m) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = kernels_.find(m); it != kernels_.end()) return it->second;
  }
  auto kernel = std::make_shared<const LinearKernel>(rasterize_kernel(m));
  std::unique_lock lock(mutex_);
  return kernels_.try_emplace(m, std::move(kernel)).first->second;
}

std::size_t KernelCache::size() const {
  std::shared_lock lock(mutex_);
  return kernels_.size();
}

KernelCache& KernelCache::shared() {
  static KernelCache cache;
  return cache;
}

BlurOperator::BlurOperator(const MotionFlow& flow, KernelCache& cache)
    : height_(flow.height()), width_(flow.width()) {
  if (height_ < 1 || width_ < 1) throw ShapeError("blur operator: empty flow");
  per_pixel_.resize(static_cast<std::size_t>(height_) * width_);
  std::map<Motion, const LinearKernel*> local;
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      const Motion m = flow.at(r, c);
      auto it = local.find(m);
      if (it == local.end()) {
        owned_.push_back(cache.get(m));
        it = local.emplace(m, owned_.back().get()).first;
      }
      per_pixel_[static_cast<std::size_t>(r) * width_ + c] = it->second;
    }
}

namespace {

void require_match(const Image& img, const MotionFlow& flow, const char* what) {
  if (img.height() != flow.height() || img.width() != flow.width())
    throw ShapeError(std::string(what) + ": image is " + std::to_string(img.height()) + "x" +
                     std::to_string(img.width()) + " but flow is " + std::to_string(flow.height()) + "x" +
                     std::to_string(flow.width()));
}

}  // namespace

Image apply_blur(const Image& x, const MotionFlow& flow) {
  require_match(x, flow, "apply_blur");
  const BlurOperator h(flow);
  std::vector<Plane<double>> out(static_cast<std::size_t>(x.channels()));
  parallel_for(0, x.channels(), [&](std::ptrdiff_t ch) { out[ch] = h.apply(x.plane(static_cast<int>(ch))); });
  return Image::from_planes(std::move(out));
}

Image apply_adjoint(const Image& y, const MotionFlow& flow) {
  require_match(y, flow, "apply_adjoint");
  const BlurOperator h(flow);
  std::vector<Plane<double>> out(static_cast<std::size_t>(y.channels()));
  parallel_for(0, y.channels(), [&](std::ptrdiff_t ch) { out[ch] = h.adjoint(y.plane(static_cast<int>(ch))); });
  return Image::from_planes(std::move(out));
}

Image add_noise(const Image& y, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
  if (spec.sigma == 0.0) return y;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, spec.sigma);
  Image out = y;
  // Row-major, channel-interleaved draw order.
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      for (int ch = 0; ch < out.channels(); ++ch) out(r, c, ch) = std::clamp(out(r, c, ch) + gauss(rng), 0.0, 1.0);
  return out;
}

}  // namespace mfd
