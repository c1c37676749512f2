#pragma once

#include <span>
#include <string>

#include "gvmt/numerics/ops.h"
#include "gvmt/numerics/rng.h"
#include "gvmt/numerics/tensor.h"

namespace gvmt::regionattn {

struct RegionAttnParams {
  num::Tensor w_t, b_t;  // [E_t × Ev], [1 × Ev]
  num::Tensor w_q, w_k, w_v;  // [Ev × Ev]
  num::Tensor w_o, b_o;  // [Ev × E_o], [1 × E_o]
  std::size_t heads = 1;

  static RegionAttnParams init(std::size_t text_dim, std::size_t visual_dim, std::size_t out_dim, std::size_t heads,
                               num::Rng& rng);
  void validate() const;
  void append_to(num::ParameterList& out, const std::string& prefix) const;
};

// One sample of a packed batch. Its text rows are
// [text_begin, text_begin + text_len) of the projected text; its memory rows
// start at memory_begin and hold `regions` blocks of `segments` rows
// (region-major, as built by the selector).
struct RegionBatchItem {
  std::size_t text_begin = 0;
  std::size_t text_len = 0;
  std::size_t memory_begin = 0;
  std::size_t segments = 0;
  std::size_t regions = 0;
};

// T' = T W_t + b_t.
num::Tensor project_text(const num::Tensor& text_enc, const RegionAttnParams& params);

// Per sample and region: multi-head attention of (T' W_q) over the region's
// segment rows through W_k / W_v. Output stacks, per sample, `regions` blocks
// of text_len rows.
num::Tensor region_cross_attention(const num::Tensor& text_proj, const num::Tensor& memory,
                                   std::span<const RegionBatchItem> items, const RegionAttnParams& params,
                                   num::AttentionProbs* probs = nullptr);

// O = mean_r Z[r] · W_o + b_o, one row per text position.
num::Tensor pool_and_project(const num::Tensor& z, std::span<const RegionBatchItem> items,
                             const RegionAttnParams& params);

// The three steps for a single sample; memory is [R·K × Ev] region-major.
num::Tensor region_attend(const num::Tensor& text_enc, const num::Tensor& memory, std::size_t regions,
                          const RegionAttnParams& params);

}  // namespace gvmt::regionattn
