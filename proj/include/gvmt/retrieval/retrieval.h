#pragma once

#include <span>
#include <string>
#include <vector>

#include "gvmt/dataio/embed.h"
#include "gvmt/numerics/tensor.h"

namespace gvmt::retrieval {

struct FusionConfig {
  std::size_t w = 2;
  double gamma = 0.1;
  void validate() const;
};

// Exact flat cosine index over one video's subtitle embeddings.
class VideoIndex {
 public:
  static VideoIndex build(const data::VideoEmbeddings& embeddings);

  const std::string& video_id() const { return video_id_; }
  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t j) const;
  double similarity(std::size_t a, std::size_t b) const;

 private:
  std::string video_id_;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> rows_;  // n × dim, unit rows
};

inline VideoIndex build_index(const data::VideoEmbeddings& e) { return VideoIndex::build(e); }

struct ScoredSegment {
  std::size_t seg_idx = 0;
  double similarity = 0.0;
};

// The min(P, N) most similar segments, ties to the lower seg_idx, returned in
// ascending seg_idx order. The query itself is eligible.
std::vector<ScoredSegment> retrieve_scored(const VideoIndex& index, std::size_t query_idx, std::size_t p);
std::vector<std::size_t> retrieve_top_p(const VideoIndex& index, std::size_t query_idx, std::size_t p);

// v_j + γ·Σ v_k over 0 < |k − j| ≤ w inside the video.
num::Tensor fuse_neighbors(std::span<const num::Tensor> features, std::size_t j, const FusionConfig& cfg);

struct GlobalContextSet {
  std::size_t query_idx = 0;
  std::vector<std::size_t> indices;    // ascending
  std::vector<num::Tensor> features;   // fused, one [R×Ev] grid per index
};

GlobalContextSet build_global_set(const VideoIndex& index, std::span<const num::Tensor> features,
                                  std::size_t query_idx, std::size_t p, const FusionConfig& cfg);

// Only the query segment, unfused: the segment-level baseline.
GlobalContextSet local_context_set(std::span<const num::Tensor> features, std::size_t query_idx);

}  // namespace gvmt::retrieval
