#include "gvmt/retrieval/retrieval.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gvmt/errors.h"

namespace gvmt::retrieval {

void FusionConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be a finite value >= 0");
}

VideoIndex VideoIndex::build(const data::VideoEmbeddings& e) {
  if (e.vectors.empty()) throw DataError("index for " + e.video_id + ": no embeddings");
  VideoIndex idx;
  idx.video_id_ = e.video_id;
  idx.n_ = e.vectors.size();
  idx.dim_ = e.vectors.front().size();
  if (idx.dim_ == 0) throw DataError("index for " + e.video_id + ": zero-dimensional embeddings");
  idx.rows_.reserve(idx.n_ * idx.dim_);
  for (std::size_t j = 0; j < idx.n_; ++j) {
    const auto& v = e.vectors[j];
    if (v.size() != idx.dim_) {
      throw DataError("index for " + e.video_id + ": embedding " + std::to_string(j) + " has dim " +
                      std::to_string(v.size()) + ", expected " + std::to_string(idx.dim_));
    }
    double sq = 0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (!(norm > 0) || !std::isfinite(norm)) {
      throw DataError("index for " + e.video_id + ": embedding " + std::to_string(j) + " has no direction");
    }
    for (double x : v) idx.rows_.push_back(x / norm);
  }
  return idx;
}

std::span<const double> VideoIndex::row(std::size_t j) const {
  if (j >= n_) throw DataError("segment " + std::to_string(j) + " not in video " + video_id_);
  return std::span<const double>(rows_).subspan(j * dim_, dim_);
}

double VideoIndex::similarity(std::size_t a, std::size_t b) const {
  auto x = row(a);
  auto y = row(b);
  double s = 0;
  for (std::size_t d = 0; d < dim_; ++d) s += x[d] * y[d];
  return s;
}

std::vector<ScoredSegment> retrieve_scored(const VideoIndex& index, std::size_t query_idx, std::size_t p) {
  if (p < 1) throw ConfigError("P must be at least 1");
  if (query_idx >= index.size()) {
    throw DataError("unknown segment " + std::to_string(query_idx) + " in video " + index.video_id());
  }
  std::vector<ScoredSegment> all(index.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = {j, index.similarity(query_idx, j)};
  const std::size_t k = std::min(p, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const ScoredSegment& a, const ScoredSegment& b) {
                      return a.similarity != b.similarity ? a.similarity > b.similarity : a.seg_idx < b.seg_idx;
                    });
  all.resize(k);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.seg_idx < b.seg_idx; });
  return all;
}

std::vector<std::size_t> retrieve_top_p(const VideoIndex& index, std::size_t query_idx, std::size_t p) {
  std::vector<std::size_t> out;
  for (const auto& s : retrieve_scored(index, query_idx, p)) out.push_back(s.seg_idx);
  return out;
}

num::Tensor fuse_neighbors(std::span<const num::Tensor> features, std::size_t j, const FusionConfig& cfg) {
  if (j >= features.size()) throw DataError("fuse_neighbors: segment " + std::to_string(j) + " has no features");
  std::vector<double> out = features[j].to_vector();
  const std::size_t lo = j >= cfg.w ? j - cfg.w : 0;
  const std::size_t hi = std::min(features.size() - 1, j + cfg.w);
  for (std::size_t k = lo; k <= hi; ++k) {
    if (k == j) continue;
    if (features[k].shape() != features[j].shape()) {
      throw ShapeError("fuse_neighbors: segment " + std::to_string(k) + " has shape " +
                       num::shape_str(features[k].shape()));
    }
    auto v = features[k].data();
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += cfg.gamma * v[e];
  }
  return num::Tensor::from_data(features[j].shape(), std::move(out));
}

GlobalContextSet build_global_set(const VideoIndex& index, std::span<const num::Tensor> features,
                                  std::size_t query_idx, std::size_t p, const FusionConfig& cfg) {
  GlobalContextSet set;
  set.query_idx = query_idx;
  set.indices = retrieve_top_p(index, query_idx, p);
  for (auto j : set.indices) {
    if (j >= features.size()) {
      throw DataError("video " + index.video_id() + ": no features for retrieved segment " + std::to_string(j));
    }
    set.features.push_back(fuse_neighbors(features, j, cfg));
  }
  return set;
}

GlobalContextSet local_context_set(std::span<const num::Tensor> features, std::size_t query_idx) {
  if (query_idx >= features.size()) throw DataError("no features for segment " + std::to_string(query_idx));
  return {query_idx, {query_idx}, {features[query_idx]}};
}

}  // namespace gvmt::retrieval
