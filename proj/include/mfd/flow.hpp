#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <string>

#include "mfd/errors.hpp"

namespace mfd {

/// Integer per-pixel motion (u horizontal, v vertical; v grows downward).
struct Motion {
  int u = 0;
  int v = 0;
  auto operator<=>(const Motion&) const = default;
};

using FlowPlane = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FieldPlane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Discrete label space D_u+ x D_v: u in [0, u_max], v in [-v_max, v_max].
///
/// The two classifier heads share one label axis: u-labels occupy
/// [0, u_max] and v-labels occupy [u_max+1, u_max+1+2*v_max].
class FlowDomain {
 public:
  FlowDomain() = default;
  FlowDomain(int u_max, int v_max) : u_max_(u_max), v_max_(v_max) {
    if (u_max < 0 || v_max < 0) throw ParameterError("flow domain bounds must be nonnegative");
    if (u_max > 32767 || v_max > 32767) throw ParameterError("flow domain bounds exceed int16 storage");
  }

  int u_max() const { return u_max_; }
  int v_max() const { return v_max_; }
  int u_count() const { return u_max_ + 1; }
  int v_count() const { return 2 * v_max_ + 1; }
  int label_count() const { return u_count() + v_count(); }

  bool contains(Motion m) const { return m.u >= 0 && m.u <= u_max_ && m.v >= -v_max_ && m.v <= v_max_; }

  bool operator==(const FlowDomain&) const = default;

 private:
  int u_max_ = 0;
  int v_max_ = 0;
};

/// Pair of classifier labels, each on the shared label axis.
struct LabelPair {
  int u_label = 0;
  int v_label = 0;
  bool operator==(const LabelPair&) const = default;
};

LabelPair label_of(Motion m, const FlowDomain& dom);
Motion motion_of(LabelPair labels, const FlowDomain& dom);

/// Index of v inside the v head alone, in [0, 2*v_max].
inline int v_head_index(int v, const FlowDomain& dom) { return v + dom.v_max(); }

/// Dense integer motion flow M = (U, V).
class MotionFlow {
 public:
  MotionFlow() = default;
  MotionFlow(int height, int width) : u_(FlowPlane::Zero(height, width)), v_(FlowPlane::Zero(height, width)) {
    if (height < 1 || width < 1) throw ShapeError("flow dimensions must be positive");
  }
  MotionFlow(FlowPlane u, FlowPlane v) : u_(std::move(u)), v_(std::move(v)) {
    if (u_.rows() != v_.rows() || u_.cols() != v_.cols()) throw ShapeError("U and V planes differ in size");
    if (u_.rows() < 1 || u_.cols() < 1) throw ShapeError("flow dimensions must be positive");
  }

  int height() const { return static_cast<int>(u_.rows()); }
  int width() const { return static_cast<int>(u_.cols()); }

  FlowPlane& u() { return u_; }
  FlowPlane& v() { return v_; }
  const FlowPlane& u() const { return u_; }
  const FlowPlane& v() const { return v_; }

  Motion at(int row, int col) const { return {u_(row, col), v_(row, col)}; }
  void set(int row, int col, Motion m) {
    u_(row, col) = m.u;
    v_(row, col) = m.v;
  }

  /// Every vector lies in D_u+ x D_v.
  bool in_domain(const FlowDomain& dom) const {
    return (u_ >= 0).all() && (u_ <= dom.u_max()).all() && (v_ >= -dom.v_max()).all() && (v_ <= dom.v_max()).all();
  }

  void require_domain(const FlowDomain& dom) const;

  bool operator==(const MotionFlow& o) const {
    return height() == o.height() && width() == o.width() && (u_ == o.u_).all() && (v_ == o.v_).all();
  }

 private:
  FlowPlane u_;
  FlowPlane v_;
};

/// Continuous flow before discretization.
struct FlowField {
  FieldPlane u;
  FieldPlane v;

  FlowField() = default;
  FlowField(int height, int width) : u(FieldPlane::Zero(height, width)), v(FieldPlane::Zero(height, width)) {}

  int height() const { return static_cast<int>(u.rows()); }
  int width() const { return static_cast<int>(u.cols()); }

  FlowField& operator+=(const FlowField& o) {
    u += o.u;
    v += o.v;
    return *this;
  }
};

}  // namespace mfd
