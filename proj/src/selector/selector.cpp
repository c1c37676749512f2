#include "gvmt/selector/selector.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gvmt/errors.h"
#include "gvmt/numerics/ops.h"

namespace gvmt::selector {

using num::Tensor;

void SelectorConfig::validate() const {
  if (k < 1) throw ConfigError("K must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
}

SelectorParams SelectorParams::init(std::size_t text_dim, std::size_t visual_dim, num::Rng& rng) {
  return {num::xavier_uniform(text_dim, visual_dim, rng), Tensor::zeros({1, visual_dim}, true)};
}

void SelectorParams::append_to(num::ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "w_s", w_s});
  out.push_back({prefix + "b_s", b_s});
}

Tensor pooled_segments(std::span<const Tensor> grids) {
  if (grids.empty()) throw ShapeError("pooled_segments: no segments");
  const std::size_t r = grids.front().rows();
  const std::size_t ev = grids.front().cols();
  std::vector<double> out(grids.size() * ev, 0.0);
  for (std::size_t j = 0; j < grids.size(); ++j) {
    if (grids[j].shape() != num::Shape{r, ev}) throw ShapeError("pooled_segments: inconsistent grid shapes");
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t e = 0; e < ev; ++e) out[j * ev + e] += grids[j](a, e);
    for (std::size_t e = 0; e < ev; ++e) out[j * ev + e] /= static_cast<double>(r);
  }
  return Tensor::from_data({grids.size(), ev}, std::move(out));
}

Tensor segment_scores(const Tensor& text_enc, const retrieval::GlobalContextSet& set, const SelectorParams& params) {
  if (set.features.empty()) throw ShapeError("score_segments: empty context set");
  const Tensor pooled = pooled_segments(set.features);
  if (pooled.cols() != params.w_s.cols()) {
    throw ShapeError("score_segments: visual dim " + std::to_string(pooled.cols()) + " vs projection " +
                     num::shape_str(params.w_s.shape()));
  }
  const Tensor query = num::mean_rows(num::add_row(num::matmul(text_enc, params.w_s), params.b_s));
  return num::scale(num::matmul(query, num::transpose(pooled)), 1.0 / std::sqrt(static_cast<double>(pooled.cols())));
}

Tensor score_segments(const Tensor& text_enc, const retrieval::GlobalContextSet& set, const SelectorParams& params) {
  return num::softmax_rows(segment_scores(text_enc, set, params));
}

std::vector<std::size_t> select_top_k(std::span<const double> alpha, std::size_t k) {
  if (k < 1) throw ConfigError("K must be at least 1");
  std::vector<std::size_t> order(alpha.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) { return alpha[a] != alpha[b] ? alpha[a] > alpha[b] : a < b; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

SelectedContextSet fuse_unselected(const retrieval::GlobalContextSet& set, std::vector<std::size_t> positions,
                                   const SelectorConfig& cfg) {
  const std::size_t p = set.features.size();
  if (positions.empty()) throw ShapeError("fuse_unselected: nothing selected");
  for (std::size_t m = 0; m < positions.size(); ++m) {
    if (positions[m] >= p || (m > 0 && positions[m] <= positions[m - 1])) {
      throw ShapeError("fuse_unselected: positions must be ascending and below P");
    }
  }
  SelectedContextSet out;
  const double half = cfg.lambda / 2.0;
  for (std::size_t m = 0; m < positions.size(); ++m) {
    const std::size_t j = positions[m];
    const std::size_t lo = m == 0 ? 0 : positions[m - 1] + 1;
    const std::size_t hi = m + 1 == positions.size() ? p : positions[m + 1];
    std::vector<double> v = set.features[j].to_vector();
    for (std::size_t k = lo; k < hi; ++k) {
      if (k == j) continue;
      auto u = set.features[k].data();
      for (std::size_t e = 0; e < v.size(); ++e) v[e] += half * u[e];
    }
    out.features.push_back(Tensor::from_data(set.features[j].shape(), std::move(v)));
    out.indices.push_back(set.indices.at(j));
  }
  out.positions = std::move(positions);
  return out;
}

Tensor soft_weights(const Tensor& alpha, std::span<const std::size_t> positions) {
  return num::normalize_sum(num::gather_cols(alpha, positions), static_cast<double>(positions.size()));
}

SelectedContextSet apply_soft_weighting(const SelectedContextSet& selected, const SelectorConfig& cfg) {
  if (!cfg.soft_weighting) return selected;
  SelectedContextSet out = selected;
  const Tensor w = soft_weights(selected.alpha, selected.positions);
  for (std::size_t k = 0; k < out.features.size(); ++k) {
    const std::vector<std::size_t> to_weight(out.features[k].rows(), k);
    out.features[k] = num::scale_rows(out.features[k], w, to_weight);
  }
  return out;
}

Tensor region_memory(const SelectedContextSet& selected, const SelectorConfig& cfg) {
  const std::size_t k = selected.features.size();
  if (k == 0) throw ShapeError("region_memory: no selected segments");
  const std::size_t r = selected.features.front().rows();
  const std::size_t ev = selected.features.front().cols();
  std::vector<double> data(r * k * ev);
  for (std::size_t s = 0; s < k; ++s) {
    if (selected.features[s].shape() != num::Shape{r, ev}) throw ShapeError("region_memory: inconsistent grids");
    auto g = selected.features[s].data();
    for (std::size_t a = 0; a < r; ++a)
      std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(a * ev), ev, data.begin() + static_cast<std::ptrdiff_t>((a * k + s) * ev));
  }
  Tensor stacked = Tensor::from_data({r * k, ev}, std::move(data));
  if (!cfg.soft_weighting || !selected.alpha.defined()) return stacked;
  std::vector<std::size_t> to_weight(r * k);
  for (std::size_t row = 0; row < to_weight.size(); ++row) to_weight[row] = row % k;
  return num::scale_rows(stacked, soft_weights(selected.alpha, selected.positions), to_weight);
}

SelectedContextSet run_selector(const Tensor& text_enc, const retrieval::GlobalContextSet& set,
                                const SelectorParams& params, const SelectorConfig& cfg) {
  Tensor alpha = score_segments(text_enc, set, params);
  auto out = fuse_unselected(set, select_top_k(alpha.data(), cfg.k), cfg);
  out.alpha = std::move(alpha);
  return out;
}

SelectedContextSet pass_through(const retrieval::GlobalContextSet& set) {
  SelectedContextSet out;
  out.positions.resize(set.features.size());
  std::iota(out.positions.begin(), out.positions.end(), 0);
  out.indices = set.indices;
  out.features = set.features;
  return out;
}

}  // namespace gvmt::selector
