#include "mfd/flow.hpp"

namespace mfd {

LabelPair label_of(Motion m, const FlowDomain& dom) {
  if (!dom.contains(m))
    throw DomainError("motion (" + std::to_string(m.u) + "," + std::to_string(m.v) + ") outside domain u in [0," +
                      std::to_string(dom.u_max()) + "], |v| <= " + std::to_string(dom.v_max()));
  return {m.u, dom.u_count() + m.v + dom.v_max()};
}

Motion motion_of(LabelPair labels, const FlowDomain& dom) {
  if (labels.u_label < 0 || labels.u_label > dom.u_max())
    throw DomainError("u label " + std::to_string(labels.u_label) + " outside [0," + std::to_string(dom.u_max()) + "]");
  const int v_index = labels.v_label - dom.u_count();
  if (v_index < 0 || v_index >= dom.v_count())
    throw DomainError("v label " + std::to_string(labels.v_label) + " outside [" + std::to_string(dom.u_count()) +
                      "," + std::to_string(dom.label_count() - 1) + "]");
  return {labels.u_label, v_index - dom.v_max()};
}

void MotionFlow::require_domain(const FlowDomain& dom) const {
  for (int r = 0; r < height(); ++r)
    for (int c = 0; c < width(); ++c)
      if (!dom.contains(at(r, c)))
        throw DomainError("flow vector (" + std::to_string(u_(r, c)) + "," + std::to_string(v_(r, c)) +
                          ") at row " + std::to_string(r) + ", col " + std::to_string(c) + " outside domain");
}

}  // namespace mfd
