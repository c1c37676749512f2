#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gvmt/numerics/rng.h"
#include "gvmt/numerics/tensor.h"

namespace gvmt::num {

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n]
Tensor transpose(const Tensor& a);

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor affine(const Tensor& a, double mul, double add);  // mul·a + add
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Row broadcasts: x [m×n] op v [1×n].
Tensor add_row(const Tensor& x, const Tensor& v);
Tensor mul_row(const Tensor& x, const Tensor& v);

// out[i,:] = x[i,:] · w[row_to_weight[i]], w of shape [1×n].
Tensor scale_rows(const Tensor& x, const Tensor& w, std::span<const std::size_t> row_to_weight);

// ---- reductions -----------------------------------------------------------

Tensor sum_all(const Tensor& a);   // -> [1]
Tensor mean_all(const Tensor& a);  // -> [1]
Tensor mean_rows(const Tensor& x);  // [m×n] -> [1×n]

// Row-means of consecutive row ranges: offsets has B+1 entries, result [B×n].
Tensor segment_mean_rows(const Tensor& x, std::span<const std::size_t> offsets);

// A group of `n_blocks` contiguous blocks of `block_rows` rows each, starting
// at `begin`; reduced to the elementwise mean block.
struct BlockGroup {
  std::size_t begin = 0;
  std::size_t block_rows = 0;
  std::size_t n_blocks = 0;
};
// Output stacks each group's mean block in order: Σ block_rows rows.
Tensor mean_of_blocks(const Tensor& x, std::span<const BlockGroup> groups);

// x / sum(x) · factor, for a [1×n] row of positive values.
Tensor normalize_sum(const Tensor& x, double factor = 1.0);

// ---- indexing -------------------------------------------------------------

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// ---- normalization and regularization -------------------------------------

// Row softmax; masked-out entries (mask[i] == false) behave as -inf and
// receive probability 0. A fully masked row is an error.
Tensor softmax_rows(const Tensor& x, std::optional<std::span<const bool>> mask = std::nullopt);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// ---- attention ------------------------------------------------------------

// Query rows [q_begin, q_begin+q_len) attend to key/value rows
// [k_begin, k_begin+k_len). Query ranges of different groups may overlap,
// which lets several groups share one set of query rows without copying.
struct AttentionGroup {
  std::size_t q_begin = 0;
  std::size_t q_len = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
};

struct AttentionOptions {
  std::size_t heads = 1;
  // Query i of a group may see key j only if j <= i + (k_len - q_len).
  bool causal = false;
  // Optional per-key validity over all rows of k/v.
  std::optional<std::span<const bool>> key_mask;
};

// Filled on request: probabilities laid out group-major, then head, then
// query row, then key. Used by tests to inspect attention weights.
struct AttentionProbs {
  std::vector<double> values;
  std::vector<std::size_t> group_offsets;  // start of each group in `values`
};

// Scaled dot-product multi-head attention without projections:
// for each group and head, softmax(Q_h K_hᵀ / sqrt(d/heads)) V_h, heads
// concatenated along columns. Output rows follow group order.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 std::span<const AttentionGroup> groups, const AttentionOptions& options,
                 AttentionProbs* probs = nullptr);

// ---- initialization -------------------------------------------------------

// Uniform in ±sqrt(6 / (rows + cols)), requires_grad set.
Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// ---- losses ---------------------------------------------------------------

inline constexpr long kIgnoreTarget = -1;

// Mean over non-ignored rows of −Σ_y q(y)·log softmax(logits)_y with
// q = (1−ε)·one_hot(target) + ε/V.
Tensor cross_entropy_label_smoothed(const Tensor& logits, std::span<const long> targets,
                                    double epsilon);

}  // namespace gvmt::num
