#include "gvmt/bifusion/bifusion.h"

#include <vector>

#include "gvmt/errors.h"
#include "gvmt/numerics/ops.h"

namespace gvmt::bifusion {

using num::Tensor;

GateParams GateParams::init(std::size_t d_h, double raw_value) {
  return {Tensor::full({1, d_h}, raw_value, true)};
}

Tensor GateParams::gate() const { return num::sigmoid(raw_gate); }

void GateParams::append_to(num::ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "raw_gate", raw_gate});
}

namespace {

Tensor cross(const Tensor& queries, const Tensor& keys, std::span<const RowSpan> spans) {
  if (queries.shape() != keys.shape()) {
    throw ShapeError("bi-directional attention: " + num::shape_str(queries.shape()) + " vs " +
                     num::shape_str(keys.shape()));
  }
  std::vector<num::AttentionGroup> groups;
  if (spans.empty()) {
    groups.push_back({0, queries.rows(), 0, keys.rows()});
  } else {
    for (const auto& s : spans) groups.push_back({s.begin, s.len, s.begin, s.len});
  }
  return num::attention(queries, keys, keys, groups, {1, false, std::nullopt});
}

}  // namespace

Tensor t2v_attention(const Tensor& t, const Tensor& o, std::span<const RowSpan> spans) { return cross(t, o, spans); }

Tensor v2t_attention(const Tensor& o, const Tensor& t, std::span<const RowSpan> spans) { return cross(o, t, spans); }

Tensor gated_fuse(const Tensor& h_t2v, const Tensor& h_v2t, const Tensor& t, const GateParams& gate) {
  if (h_t2v.shape() != t.shape() || h_v2t.shape() != t.shape()) throw ShapeError("gated_fuse: shape mismatch");
  const Tensor g = gate.gate();
  const Tensor one_minus_g = num::affine(g, -1.0, 1.0);
  return num::add(num::mul_row(num::add(h_v2t, t), one_minus_g), num::mul_row(h_t2v, g));
}

Tensor bifuse(const Tensor& t, const Tensor& o, const GateParams& gate, std::span<const RowSpan> spans) {
  return gated_fuse(t2v_attention(t, o, spans), v2t_attention(o, t, spans), t, gate);
}

}  // namespace gvmt::bifusion
