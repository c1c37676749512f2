#pragma once

#include <span>
#include <string>
#include <vector>

#include "gvmt/bifusion/bifusion.h"
#include "gvmt/dataio/corpus.h"
#include "gvmt/dataio/embed.h"
#include "gvmt/dataio/features.h"
#include "gvmt/dataio/vocab.h"
#include "gvmt/model/config.h"
#include "gvmt/model/transformer.h"
#include "gvmt/regionattn/region_attention.h"
#include "gvmt/retrieval/retrieval.h"
#include "gvmt/selector/selector.h"

namespace gvmt::model {

// One subtitle ready for the model: ids without BOS/EOS plus its retrieved
// (or local-only) visual context.
struct Sample {
  std::string video_id;
  std::size_t seg_idx = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> tgt;
  retrieval::GlobalContextSet context;
};

// Retrieval runs here once per sample; it has no learnable parameters.
std::vector<Sample> prepare_samples(const data::Corpus& corpus, const data::FeatureStore& features,
                                    const data::EmbeddingStore& embeddings, const RunConfig& cfg,
                                    const data::Vocabulary& src_vocab, const data::Vocabulary& tgt_vocab);

// Encoder, selector, region attention, gated fusion and decoder, with their
// parameters. Not copyable: parameters are shared tensor handles.
class Model {
 public:
  Model(RunConfig cfg, data::Vocabulary src_vocab, data::Vocabulary tgt_vocab, std::size_t regions,
        std::size_t visual_dim);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const RunConfig& config() const { return cfg_; }
  RunConfig& mutable_config() { return cfg_; }
  const data::Vocabulary& source_vocab() const { return src_vocab_; }
  const data::Vocabulary& target_vocab() const { return tgt_vocab_; }
  std::size_t regions() const { return regions_; }
  std::size_t visual_dim() const { return visual_dim_; }

  TransformerParams& transformer() { return tf_; }
  const TransformerParams& transformer() const { return tf_; }
  selector::SelectorParams& selector_params() { return sel_; }
  regionattn::RegionAttnParams& region_params() { return region_; }
  bifusion::GateParams& gate() { return gate_; }

  // Stable order and names; used by the optimizer and checkpoints.
  num::ParameterList parameters() const;

  RunMode mode(bool training, num::Rng* rng) const { return {training, cfg_.dropout, rng}; }

  struct Encoded {
    Packed src;
    num::Tensor text;   // T, [ΣL × d_h]
    num::Tensor fused;  // F, [ΣL × d_h]
  };
  Encoded encode_batch(std::span<const Sample* const> batch, const RunMode& mode) const;

  // Teacher-forced logits, one row per target position (targets + EOS).
  num::Tensor logits(std::span<const Sample* const> batch, const RunMode& mode) const;
  // Label-smoothed cross-entropy, mean over target tokens.
  num::Tensor loss(std::span<const Sample* const> batch, const RunMode& mode) const;

 private:
  RunConfig cfg_;
  data::Vocabulary src_vocab_, tgt_vocab_;
  std::size_t regions_ = 0, visual_dim_ = 0;
  TransformerParams tf_;
  selector::SelectorParams sel_;
  regionattn::RegionAttnParams region_;
  bifusion::GateParams gate_;
};

// Targets followed by EOS, for all samples of a batch.
std::vector<long> packed_targets(std::span<const Sample* const> batch);
// BOS followed by targets.
Packed decoder_inputs(std::span<const Sample* const> batch);

std::vector<const Sample*> pointers(std::span<const Sample> samples);

}  // namespace gvmt::model
