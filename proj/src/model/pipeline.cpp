#include "gvmt/model/pipeline.h"

#include <optional>

#include "gvmt/errors.h"
#include "gvmt/numerics/ops.h"

namespace gvmt::model {

using num::Tensor;

std::vector<Sample> prepare_samples(const data::Corpus& corpus, const data::FeatureStore& features,
                                    const data::EmbeddingStore& embeddings, const RunConfig& cfg,
                                    const data::Vocabulary& src_vocab, const data::Vocabulary& tgt_vocab) {
  const retrieval::FusionConfig fusion{cfg.w, cfg.gamma};
  fusion.validate();
  std::vector<Sample> out;
  for (const auto& video : corpus) {
    auto f = features.find(video.video_id);
    if (f == features.end()) throw DataError("no features for video " + video.video_id);
    const auto& grids = f->second.segments;
    if (grids.size() != video.records.size()) throw DataError("feature count mismatch for video " + video.video_id);
    std::optional<retrieval::VideoIndex> index;
    if (!cfg.no_gr) {
      auto e = embeddings.find(video.video_id);
      if (e == embeddings.end()) throw DataError("no embeddings for video " + video.video_id);
      if (e->second.vectors.size() != video.records.size()) {
        throw DataError("embedding count mismatch for video " + video.video_id);
      }
      index = retrieval::build_index(e->second);
    }
    for (const auto& rec : video.records) {
      Sample s;
      s.video_id = rec.video_id;
      s.seg_idx = rec.seg_idx;
      s.src = src_vocab.encode(rec.source);
      s.tgt = tgt_vocab.encode(rec.target);
      if (s.src.size() > cfg.max_src_len) {
        throw DataError("video " + rec.video_id + " segment " + std::to_string(rec.seg_idx) + ": source length " +
                        std::to_string(s.src.size()) + " exceeds max_src_len " + std::to_string(cfg.max_src_len));
      }
      if (s.tgt.size() + 1 > cfg.max_tgt_len) {
        throw DataError("video " + rec.video_id + " segment " + std::to_string(rec.seg_idx) + ": target length " +
                        std::to_string(s.tgt.size()) + " exceeds max_tgt_len");
      }
      s.context = cfg.no_gr ? retrieval::local_context_set(grids, rec.seg_idx)
                            : retrieval::build_global_set(*index, grids, rec.seg_idx, cfg.p, fusion);
      out.push_back(std::move(s));
    }
  }
  return out;
}

Model::Model(RunConfig cfg, data::Vocabulary src_vocab, data::Vocabulary tgt_vocab, std::size_t regions,
             std::size_t visual_dim)
    : cfg_(cfg), src_vocab_(std::move(src_vocab)), tgt_vocab_(std::move(tgt_vocab)), regions_(regions),
      visual_dim_(visual_dim) {
  cfg_.validate();
  if (regions == 0 || visual_dim == 0) throw ConfigError("model needs R >= 1 and Ev >= 1");
  num::Rng rng(cfg_.seed);
  tf_ = TransformerParams::init({cfg_.d_h, cfg_.ffn, cfg_.heads, cfg_.layers, src_vocab_.size(), tgt_vocab_.size()},
                                rng);
  sel_ = selector::SelectorParams::init(cfg_.d_h, visual_dim, rng);
  region_ = regionattn::RegionAttnParams::init(cfg_.d_h, visual_dim, cfg_.d_h, cfg_.heads, rng);
  gate_ = bifusion::GateParams::init(cfg_.d_h);
}

num::ParameterList Model::parameters() const {
  num::ParameterList out;
  tf_.append_to(out, "tf.");
  sel_.append_to(out, "sel.");
  region_.append_to(out, "region.");
  gate_.append_to(out, "fusion.");
  return out;
}

Model::Encoded Model::encode_batch(std::span<const Sample* const> batch, const RunMode& mode) const {
  if (batch.empty()) throw ShapeError("empty batch");
  Encoded enc;
  for (const auto* s : batch) {
    if (s->src.empty()) throw DataError("sample " + s->video_id + "/" + std::to_string(s->seg_idx) + " has no source");
    if (s->src.size() > cfg_.max_src_len) throw DataError("source longer than max_src_len");
    enc.src.add(s->src);
  }
  enc.text = encode(tf_, enc.src, mode);
  if (cfg_.text_only) {
    enc.fused = enc.text;
    return enc;
  }

  const selector::SelectorConfig sel_cfg{cfg_.k, cfg_.lambda, cfg_.soft_weighting};
  std::vector<Tensor> memories;
  std::vector<regionattn::RegionBatchItem> items;
  std::vector<bifusion::RowSpan> spans;
  std::size_t mem_row = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ctx = batch[b]->context;
    if (ctx.features.empty()) {
      throw DataError("sample " + batch[b]->video_id + "/" + std::to_string(batch[b]->seg_idx) + " has no context set");
    }
    const std::size_t begin = enc.src.begin(b), len = enc.src.length(b);
    selector::SelectedContextSet selected =
        cfg_.no_tvss ? selector::pass_through(ctx)
                     : selector::run_selector(num::slice_rows(enc.text, begin, len), ctx, sel_, sel_cfg);
    Tensor mem = selector::region_memory(selected, sel_cfg);
    const std::size_t k = selected.features.size();
    items.push_back({begin, len, mem_row, k, regions_});
    spans.push_back({begin, len});
    mem_row += mem.rows();
    memories.push_back(std::move(mem));
  }
  const Tensor memory = num::concat_rows(memories);
  const Tensor z = regionattn::region_cross_attention(regionattn::project_text(enc.text, region_), memory, items, region_);
  const Tensor o = regionattn::pool_and_project(z, items, region_);
  enc.fused = bifusion::bifuse(enc.text, o, gate_, spans);
  return enc;
}

Packed decoder_inputs(std::span<const Sample* const> batch) {
  Packed p;
  std::vector<std::size_t> seq;
  for (const auto* s : batch) {
    seq.assign(1, data::Vocabulary::kBos);
    seq.insert(seq.end(), s->tgt.begin(), s->tgt.end());
    p.add(seq);
  }
  return p;
}

std::vector<long> packed_targets(std::span<const Sample* const> batch) {
  std::vector<long> t;
  for (const auto* s : batch) {
    for (auto id : s->tgt) t.push_back(static_cast<long>(id));
    t.push_back(static_cast<long>(data::Vocabulary::kEos));
  }
  return t;
}

Tensor Model::logits(std::span<const Sample* const> batch, const RunMode& mode) const {
  const Encoded enc = encode_batch(batch, mode);
  const Packed tgt_in = decoder_inputs(batch);
  for (std::size_t b = 0; b < tgt_in.batch(); ++b) {
    if (tgt_in.length(b) > cfg_.max_tgt_len) throw DataError("target longer than max_tgt_len");
  }
  return output_logits(tf_, decode_hidden(tf_, tgt_in, enc.fused, enc.src.offsets, mode));
}

Tensor Model::loss(std::span<const Sample* const> batch, const RunMode& mode) const {
  const auto targets = packed_targets(batch);
  return num::cross_entropy_label_smoothed(logits(batch, mode), targets, cfg_.label_smoothing);
}

std::vector<const Sample*> pointers(std::span<const Sample> samples) {
  std::vector<const Sample*> out;
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

}  // namespace gvmt::model
