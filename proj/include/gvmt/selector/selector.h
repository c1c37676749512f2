#pragma once

#include <span>
#include <string>
#include <vector>

#include "gvmt/numerics/rng.h"
#include "gvmt/numerics/tensor.h"
#include "gvmt/retrieval/retrieval.h"

namespace gvmt::selector {

struct SelectorConfig {
  std::size_t k = 5;
  double lambda = 0.1;
  bool soft_weighting = true;
  void validate() const;
};

// Text → visual projection used for scoring.
struct SelectorParams {
  num::Tensor w_s;  // [E_t × Ev]
  num::Tensor b_s;  // [1 × Ev]

  static SelectorParams init(std::size_t text_dim, std::size_t visual_dim, num::Rng& rng);
  void append_to(num::ParameterList& out, const std::string& prefix) const;
};

// Region-mean of each grid, stacked: [P × Ev]. Constant (no gradient).
num::Tensor pooled_segments(std::span<const num::Tensor> grids);

// s_j = mean_l (T W_s + b_s)_l · pool(ṽ_j) / √Ev, as [1 × P].
num::Tensor segment_scores(const num::Tensor& text_enc, const retrieval::GlobalContextSet& set,
                           const SelectorParams& params);
// α = softmax(s), [1 × P].
num::Tensor score_segments(const num::Tensor& text_enc, const retrieval::GlobalContextSet& set,
                           const SelectorParams& params);

// Positions of the min(K, P) largest values, ties to the lower position,
// returned ascending.
std::vector<std::size_t> select_top_k(std::span<const double> alpha, std::size_t k);

struct SelectedContextSet {
  std::vector<std::size_t> positions;  // within I_global, ascending
  std::vector<std::size_t> indices;    // seg_idx of each selected position
  num::Tensor alpha;                   // [1 × P]
  std::vector<num::Tensor> features;   // one [R × Ev] grid per selected position
};

// ṽ'_j = ṽ_j + λ/2 · Σ ṽ_k over unselected k strictly between the previous
// and next selected positions; the first and last extend to the ends.
SelectedContextSet fuse_unselected(const retrieval::GlobalContextSet& set, std::vector<std::size_t> positions,
                                   const SelectorConfig& cfg);

// K · α_j / Σ_selected α, [1 × K]; differentiable in α.
num::Tensor soft_weights(const num::Tensor& alpha, std::span<const std::size_t> positions);

// Scales every selected grid by its soft weight; identity when disabled.
SelectedContextSet apply_soft_weighting(const SelectedContextSet& selected, const SelectorConfig& cfg);

// Selected grids stacked region-major: row r·K + k holds region r of the
// k-th selected segment. Soft weights applied when enabled. [R·K × Ev].
num::Tensor region_memory(const SelectedContextSet& selected, const SelectorConfig& cfg);

// Scoring, selection and absorption in one call.
SelectedContextSet run_selector(const num::Tensor& text_enc, const retrieval::GlobalContextSet& set,
                                const SelectorParams& params, const SelectorConfig& cfg);

// Every retrieved segment, no scoring: the selector switched off.
SelectedContextSet pass_through(const retrieval::GlobalContextSet& set);

}  // namespace gvmt::selector
