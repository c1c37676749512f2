#include "gvmt/model/transformer.h"

#include <cmath>
#include <memory>

#include "gvmt/dataio/vocab.h"
#include "gvmt/errors.h"
#include "gvmt/numerics/ops.h"

namespace gvmt::model {

using num::Tensor;

void Packed::add(std::span<const std::size_t> seq) {
  if (seq.empty()) throw ShapeError("packed sequences must be non-empty");
  ids.insert(ids.end(), seq.begin(), seq.end());
  offsets.push_back(ids.size());
}

LayerNormParams LayerNormParams::init(std::size_t d) {
  return {Tensor::full({1, d}, 1.0, true), Tensor::zeros({1, d}, true)};
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return num::layer_norm(x, gain, bias); }

AttentionParams AttentionParams::init(std::size_t d, num::Rng& rng) {
  AttentionParams p;
  p.wq = num::xavier_uniform(d, d, rng);
  p.wk = num::xavier_uniform(d, d, rng);
  p.wv = num::xavier_uniform(d, d, rng);
  p.wo = num::xavier_uniform(d, d, rng);
  p.bq = Tensor::zeros({1, d}, true);
  p.bk = Tensor::zeros({1, d}, true);
  p.bv = Tensor::zeros({1, d}, true);
  p.bo = Tensor::zeros({1, d}, true);
  return p;
}

FeedForwardParams FeedForwardParams::init(std::size_t d, std::size_t ffn, num::Rng& rng) {
  return {num::xavier_uniform(d, ffn, rng), Tensor::zeros({1, ffn}, true), num::xavier_uniform(ffn, d, rng),
          Tensor::zeros({1, d}, true)};
}

Tensor FeedForwardParams::operator()(const Tensor& x) const {
  return num::add_row(num::matmul(num::relu(num::add_row(num::matmul(x, w1), b1)), w2), b2);
}

namespace {

Tensor embedding_init(std::size_t v, std::size_t d, num::Rng& rng) {
  std::vector<double> data(v * d);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& x : data) x = rng.normal() * s;
  return Tensor::from_data({v, d}, std::move(data), true);
}

void append_attention(num::ParameterList& out, const std::string& pre, const AttentionParams& a) {
  out.push_back({pre + "wq", a.wq});
  out.push_back({pre + "bq", a.bq});
  out.push_back({pre + "wk", a.wk});
  out.push_back({pre + "bk", a.bk});
  out.push_back({pre + "wv", a.wv});
  out.push_back({pre + "bv", a.bv});
  out.push_back({pre + "wo", a.wo});
  out.push_back({pre + "bo", a.bo});
}

void append_norm(num::ParameterList& out, const std::string& pre, const LayerNormParams& n) {
  out.push_back({pre + "gain", n.gain});
  out.push_back({pre + "bias", n.bias});
}

void append_ff(num::ParameterList& out, const std::string& pre, const FeedForwardParams& f) {
  out.push_back({pre + "w1", f.w1});
  out.push_back({pre + "b1", f.b1});
  out.push_back({pre + "w2", f.w2});
  out.push_back({pre + "b2", f.b2});
}

Tensor maybe_dropout(const Tensor& x, const RunMode& mode) {
  if (!mode.training || mode.dropout == 0.0) return x;
  if (!mode.rng) throw ConfigError("training mode needs a dropout generator");
  return num::dropout(x, mode.dropout, true, *mode.rng);
}

Tensor embed(const Tensor& table, const Packed& seqs, std::size_t d, const RunMode& mode) {
  const Tensor e = num::scale(num::gather_rows(table, seqs.ids), std::sqrt(static_cast<double>(d)));
  return maybe_dropout(num::add(e, positional_encoding(seqs, d)), mode);
}

}  // namespace

TransformerParams TransformerParams::init(const TransformerDims& dims, num::Rng& rng) {
  if (dims.src_vocab == 0 || dims.tgt_vocab == 0) throw ConfigError("transformer: empty vocabulary");
  TransformerParams p;
  p.dims = dims;
  p.src_embed = embedding_init(dims.src_vocab, dims.d, rng);
  p.tgt_embed = embedding_init(dims.tgt_vocab, dims.d, rng);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    p.encoder.push_back({LayerNormParams::init(dims.d), LayerNormParams::init(dims.d),
                         AttentionParams::init(dims.d, rng), FeedForwardParams::init(dims.d, dims.ffn, rng)});
  }
  p.encoder_norm = LayerNormParams::init(dims.d);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    DecoderLayerParams dl{LayerNormParams::init(dims.d), LayerNormParams::init(dims.d), LayerNormParams::init(dims.d),
                          AttentionParams::init(dims.d, rng), AttentionParams::init(dims.d, rng),
                          FeedForwardParams::init(dims.d, dims.ffn, rng)};
    p.decoder.push_back(std::move(dl));
  }
  p.decoder_norm = LayerNormParams::init(dims.d);
  p.out_w = num::xavier_uniform(dims.d, dims.tgt_vocab, rng);
  p.out_b = Tensor::zeros({1, dims.tgt_vocab}, true);
  return p;
}

void TransformerParams::append_to(num::ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "src_embed", src_embed});
  out.push_back({prefix + "tgt_embed", tgt_embed});
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const std::string pre = prefix + "enc" + std::to_string(l) + ".";
    append_norm(out, pre + "ln_self.", encoder[l].ln_self);
    append_attention(out, pre + "self.", encoder[l].self);
    append_norm(out, pre + "ln_ff.", encoder[l].ln_ff);
    append_ff(out, pre + "ff.", encoder[l].ff);
  }
  append_norm(out, prefix + "enc_norm.", encoder_norm);
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string pre = prefix + "dec" + std::to_string(l) + ".";
    append_norm(out, pre + "ln_self.", decoder[l].ln_self);
    append_attention(out, pre + "self.", decoder[l].self);
    append_norm(out, pre + "ln_cross.", decoder[l].ln_cross);
    append_attention(out, pre + "cross.", decoder[l].cross);
    append_norm(out, pre + "ln_ff.", decoder[l].ln_ff);
    append_ff(out, pre + "ff.", decoder[l].ff);
  }
  append_norm(out, prefix + "dec_norm.", decoder_norm);
  out.push_back({prefix + "out_w", out_w});
  out.push_back({prefix + "out_b", out_b});
}

Tensor positional_encoding(const Packed& seqs, std::size_t d) {
  std::vector<double> pe(seqs.total() * d);
  for (std::size_t b = 0; b < seqs.batch(); ++b) {
    for (std::size_t pos = 0; pos < seqs.length(b); ++pos) {
      double* row = &pe[(seqs.begin(b) + pos) * d];
      for (std::size_t i = 0; i < d; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
        row[i] = i % 2 == 0 ? std::sin(static_cast<double>(pos) * freq) : std::cos(static_cast<double>(pos) * freq);
      }
    }
  }
  return Tensor::from_data({seqs.total(), d}, std::move(pe));
}

Tensor multi_head_attention(const AttentionParams& p, const Tensor& x, const Packed& x_seqs, const Tensor& memory,
                            std::span<const std::size_t> memory_offsets, std::size_t heads, bool causal,
                            std::optional<std::span<const bool>> key_mask) {
  if (memory_offsets.size() != x_seqs.offsets.size()) {
    throw ShapeError("attention: " + std::to_string(x_seqs.batch()) + " query sequences but " +
                     std::to_string(memory_offsets.size() - 1) + " memory sequences");
  }
  std::vector<num::AttentionGroup> groups;
  for (std::size_t b = 0; b < x_seqs.batch(); ++b) {
    groups.push_back({x_seqs.begin(b), x_seqs.length(b), memory_offsets[b], memory_offsets[b + 1] - memory_offsets[b]});
  }
  const Tensor q = num::add_row(num::matmul(x, p.wq), p.bq);
  const Tensor k = num::add_row(num::matmul(memory, p.wk), p.bk);
  const Tensor v = num::add_row(num::matmul(memory, p.wv), p.bv);
  const Tensor a = num::attention(q, k, v, groups, {heads, causal, key_mask});
  return num::add_row(num::matmul(a, p.wo), p.bo);
}

Tensor encode(const TransformerParams& p, const Packed& src, const RunMode& mode) {
  const std::size_t d = p.dims.d;
  // std::vector<bool> is not contiguous, so the mask lives in a plain array.
  std::unique_ptr<bool[]> mask(new bool[src.total()]);
  bool any_pad = false;
  for (std::size_t i = 0; i < src.total(); ++i) {
    if (src.ids[i] >= p.dims.src_vocab) throw ShapeError("source id " + std::to_string(src.ids[i]) + " out of vocabulary");
    mask[i] = src.ids[i] != data::Vocabulary::kPad;
    any_pad |= !mask[i];
  }
  std::optional<std::span<const bool>> key_mask;
  if (any_pad) key_mask = std::span<const bool>(mask.get(), src.total());

  Tensor x = embed(p.src_embed, src, d, mode);
  for (const auto& layer : p.encoder) {
    const Tensor h = layer.ln_self(x);
    x = num::add(x, maybe_dropout(multi_head_attention(layer.self, h, src, h, src.offsets, p.dims.heads, false, key_mask),
                                  mode));
    x = num::add(x, maybe_dropout(layer.ff(layer.ln_ff(x)), mode));
  }
  return p.encoder_norm(x);
}

Tensor decode_hidden(const TransformerParams& p, const Packed& tgt_in, const Tensor& memory,
                     std::span<const std::size_t> memory_offsets, const RunMode& mode) {
  const std::size_t d = p.dims.d;
  for (auto id : tgt_in.ids) {
    if (id >= p.dims.tgt_vocab) throw ShapeError("target id " + std::to_string(id) + " out of vocabulary");
  }
  Tensor x = embed(p.tgt_embed, tgt_in, d, mode);
  for (const auto& layer : p.decoder) {
    const Tensor h = layer.ln_self(x);
    x = num::add(x, maybe_dropout(multi_head_attention(layer.self, h, tgt_in, h, tgt_in.offsets, p.dims.heads, true), mode));
    x = num::add(x, maybe_dropout(multi_head_attention(layer.cross, layer.ln_cross(x), tgt_in, memory, memory_offsets,
                                                       p.dims.heads, false),
                                  mode));
    x = num::add(x, maybe_dropout(layer.ff(layer.ln_ff(x)), mode));
  }
  return p.decoder_norm(x);
}

Tensor output_logits(const TransformerParams& p, const Tensor& hidden) {
  return num::add_row(num::matmul(hidden, p.out_w), p.out_b);
}

}  // namespace gvmt::model
