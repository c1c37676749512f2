#include "gvmt/regionattn/region_attention.h"

#include <vector>

#include "gvmt/errors.h"

namespace gvmt::regionattn {

using num::Tensor;

RegionAttnParams RegionAttnParams::init(std::size_t text_dim, std::size_t visual_dim, std::size_t out_dim,
                                        std::size_t heads, num::Rng& rng) {
  RegionAttnParams p;
  p.w_t = num::xavier_uniform(text_dim, visual_dim, rng);
  p.b_t = Tensor::zeros({1, visual_dim}, true);
  p.w_q = num::xavier_uniform(visual_dim, visual_dim, rng);
  p.w_k = num::xavier_uniform(visual_dim, visual_dim, rng);
  p.w_v = num::xavier_uniform(visual_dim, visual_dim, rng);
  p.w_o = num::xavier_uniform(visual_dim, out_dim, rng);
  p.b_o = Tensor::zeros({1, out_dim}, true);
  p.heads = heads;
  p.validate();
  return p;
}

void RegionAttnParams::validate() const {
  const std::size_t ev = w_q.cols();
  if (heads == 0 || ev % heads != 0) {
    throw ConfigError("region attention: visual dim " + std::to_string(ev) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

void RegionAttnParams::append_to(num::ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "w_t", w_t});
  out.push_back({prefix + "b_t", b_t});
  out.push_back({prefix + "w_q", w_q});
  out.push_back({prefix + "w_k", w_k});
  out.push_back({prefix + "w_v", w_v});
  out.push_back({prefix + "w_o", w_o});
  out.push_back({prefix + "b_o", b_o});
}

Tensor project_text(const Tensor& text_enc, const RegionAttnParams& params) {
  return num::add_row(num::matmul(text_enc, params.w_t), params.b_t);
}

Tensor region_cross_attention(const Tensor& text_proj, const Tensor& memory, std::span<const RegionBatchItem> items,
                              const RegionAttnParams& params, num::AttentionProbs* probs) {
  params.validate();
  std::vector<num::AttentionGroup> groups;
  for (const auto& it : items) {
    if (it.regions == 0) throw ShapeError("region attention: R must be at least 1");
    if (it.memory_begin + it.regions * it.segments > memory.rows()) {
      throw ShapeError("region attention: memory rows out of range");
    }
    for (std::size_t r = 0; r < it.regions; ++r) {
      groups.push_back({it.text_begin, it.text_len, it.memory_begin + r * it.segments, it.segments});
    }
  }
  const Tensor q = num::matmul(text_proj, params.w_q);
  const Tensor k = num::matmul(memory, params.w_k);
  const Tensor v = num::matmul(memory, params.w_v);
  return num::attention(q, k, v, groups, {params.heads, false, std::nullopt}, probs);
}

Tensor pool_and_project(const Tensor& z, std::span<const RegionBatchItem> items, const RegionAttnParams& params) {
  std::vector<num::BlockGroup> blocks;
  std::size_t row = 0;
  for (const auto& it : items) {
    blocks.push_back({row, it.text_len, it.regions});
    row += it.text_len * it.regions;
  }
  if (row != z.rows()) throw ShapeError("pool_and_project: Z has " + std::to_string(z.rows()) + " rows, items need " + std::to_string(row));
  return num::add_row(num::matmul(num::mean_of_blocks(z, blocks), params.w_o), params.b_o);
}

Tensor region_attend(const Tensor& text_enc, const Tensor& memory, std::size_t regions,
                     const RegionAttnParams& params) {
  if (regions == 0 || memory.rows() % regions != 0) {
    throw ShapeError("region_attend: " + std::to_string(memory.rows()) + " memory rows do not split into " +
                     std::to_string(regions) + " regions");
  }
  const RegionBatchItem item{0, text_enc.rows(), 0, memory.rows() / regions, regions};
  const Tensor z = region_cross_attention(project_text(text_enc, params), memory, {&item, 1}, params);
  return pool_and_project(z, {&item, 1}, params);
}

}  // namespace gvmt::regionattn
