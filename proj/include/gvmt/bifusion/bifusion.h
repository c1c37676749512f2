#pragma once

#include <span>
#include <string>

#include "gvmt/numerics/tensor.h"

namespace gvmt::bifusion {

// g = logistic(raw_gate), one entry per hidden dimension.
struct GateParams {
  num::Tensor raw_gate;  // [1 × d_h]

  static GateParams init(std::size_t d_h, double raw_value = 0.0);
  num::Tensor gate() const;
  void append_to(num::ParameterList& out, const std::string& prefix) const;
};

// Rows [begin, begin + len) of both T and O belong to one sample. An empty
// span list means a single sample covering every row.
struct RowSpan {
  std::size_t begin = 0;
  std::size_t len = 0;
};

// softmax(T Oᵀ / √d_h) O per sample, single head.
num::Tensor t2v_attention(const num::Tensor& t, const num::Tensor& o, std::span<const RowSpan> spans = {});
// softmax(O Tᵀ / √d_h) T per sample, single head.
num::Tensor v2t_attention(const num::Tensor& o, const num::Tensor& t, std::span<const RowSpan> spans = {});

// F = (1 − g)⊙H_v2t + g⊙H_t2v + (1 − g)⊙T.
num::Tensor gated_fuse(const num::Tensor& h_t2v, const num::Tensor& h_v2t, const num::Tensor& t,
                       const GateParams& gate);

num::Tensor bifuse(const num::Tensor& t, const num::Tensor& o, const GateParams& gate,
                   std::span<const RowSpan> spans = {});

}  // namespace gvmt::bifusion
