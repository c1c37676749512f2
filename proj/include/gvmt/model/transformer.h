#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvmt/numerics/rng.h"
#include "gvmt/numerics/tensor.h"

namespace gvmt::model {

// Token ids of several sequences laid end to end; sequence b occupies
// [offsets[b], offsets[b+1]).
struct Packed {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets{0};

  void add(std::span<const std::size_t> seq);
  std::size_t batch() const { return offsets.size() - 1; }
  std::size_t begin(std::size_t b) const { return offsets[b]; }
  std::size_t length(std::size_t b) const { return offsets[b + 1] - offsets[b]; }
  std::size_t total() const { return ids.size(); }
};

// Training-mode switch plus the dropout stream.
struct RunMode {
  bool training = false;
  double dropout = 0.0;
  num::Rng* rng = nullptr;
};

struct LayerNormParams {
  num::Tensor gain, bias;
  static LayerNormParams init(std::size_t d);
  num::Tensor operator()(const num::Tensor& x) const;
};

struct AttentionParams {
  num::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  static AttentionParams init(std::size_t d, num::Rng& rng);
};

struct FeedForwardParams {
  num::Tensor w1, b1, w2, b2;
  static FeedForwardParams init(std::size_t d, std::size_t ffn, num::Rng& rng);
  num::Tensor operator()(const num::Tensor& x) const;
};

struct EncoderLayerParams {
  LayerNormParams ln_self, ln_ff;
  AttentionParams self;
  FeedForwardParams ff;
};

struct DecoderLayerParams {
  LayerNormParams ln_self, ln_cross, ln_ff;
  AttentionParams self, cross;
  FeedForwardParams ff;
};

struct TransformerDims {
  std::size_t d = 32;
  std::size_t ffn = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
};

// Pre-norm encoder–decoder with sinusoidal positions. The decoder attends
// over whatever memory it is handed.
struct TransformerParams {
  TransformerDims dims;
  num::Tensor src_embed, tgt_embed;  // [V × d]
  std::vector<EncoderLayerParams> encoder;
  LayerNormParams encoder_norm;
  std::vector<DecoderLayerParams> decoder;
  LayerNormParams decoder_norm;
  num::Tensor out_w, out_b;  // [d × V_tgt], [1 × V_tgt]

  static TransformerParams init(const TransformerDims& dims, num::Rng& rng);
  void append_to(num::ParameterList& out, const std::string& prefix) const;
};

// Sinusoidal encoding of each row's position within its sequence.
num::Tensor positional_encoding(const Packed& seqs, std::size_t d);

// Multi-head attention with input and output projections. Query rows of
// sequence b in `x` attend to rows of sequence b in `memory`.
num::Tensor multi_head_attention(const AttentionParams& p, const num::Tensor& x, const Packed& x_seqs,
                                 const num::Tensor& memory, std::span<const std::size_t> memory_offsets,
                                 std::size_t heads, bool causal,
                                 std::optional<std::span<const bool>> key_mask = std::nullopt);

// Source ids → T [N × d]. PAD ids are excluded as attention keys.
num::Tensor encode(const TransformerParams& p, const Packed& src, const RunMode& mode);

// Decoder input ids → final hidden states h [M × d], cross-attending over
// `memory` split by memory_offsets.
num::Tensor decode_hidden(const TransformerParams& p, const Packed& tgt_in, const num::Tensor& memory,
                          std::span<const std::size_t> memory_offsets, const RunMode& mode);

num::Tensor output_logits(const TransformerParams& p, const num::Tensor& hidden);

}  // namespace gvmt::model
