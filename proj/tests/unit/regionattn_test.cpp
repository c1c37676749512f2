#include <gtest/gtest.h>

#include "gvmt/errors.h"
#include "gvmt/regionattn/region_attention.h"
#include "oracles/attention_oracle.h"
#include "oracles/finite_diff.h"

using namespace gvmt;
using namespace gvmt::regionattn;
using gvmt::num::Rng;
using gvmt::num::Tensor;
namespace oracle = gvmt::testing;

namespace {

oracle::RegionOracleParams to_oracle(const RegionAttnParams& p) {
  return {oracle::to_mat(p.w_t), oracle::to_mat(p.w_q), oracle::to_mat(p.w_k), oracle::to_mat(p.w_v),
          oracle::to_mat(p.w_o), p.b_t.to_vector(),     p.b_o.to_vector(),     p.heads};
}

RegionAttnParams random_params(Rng& rng, std::size_t et, std::size_t ev, std::size_t eo, std::size_t heads) {
  auto p = RegionAttnParams::init(et, ev, eo, heads, rng);
  p.b_t = oracle::random_matrix(rng, 1, ev, true);
  p.b_o = oracle::random_matrix(rng, 1, eo, true);
  return p;
}

// Region-major memory from per-segment grids.
Tensor memory_of(const std::vector<Tensor>& segs) {
  const std::size_t r = segs[0].rows(), ev = segs[0].cols(), k = segs.size();
  std::vector<double> d(r * k * ev);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t e = 0; e < ev; ++e) d[(a * k + s) * ev + e] = segs[s](a, e);
  return Tensor::from_data({r * k, ev}, d);
}

std::vector<Tensor> random_segments(Rng& rng, std::size_t k, std::size_t r, std::size_t ev) {
  std::vector<Tensor> s;
  for (std::size_t i = 0; i < k; ++i) s.push_back(oracle::random_matrix(rng, r, ev));
  return s;
}

std::vector<oracle::Mat> mats(const std::vector<Tensor>& ts) {
  std::vector<oracle::Mat> m;
  for (const auto& t : ts) m.push_back(oracle::to_mat(t));
  return m;
}

void expect_near(const Tensor& t, std::size_t row0, const oracle::Mat& m, double tol) {
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) EXPECT_NEAR(t(row0 + i, j), m[i][j], tol);
}

Tensor z_of(const Tensor& text, const std::vector<Tensor>& segs, const RegionAttnParams& p,
            num::AttentionProbs* probs = nullptr) {
  const RegionBatchItem item{0, text.rows(), 0, segs.size(), segs[0].rows()};
  return region_cross_attention(project_text(text, p), memory_of(segs), {&item, 1}, p, probs);
}

}  // namespace

TEST(ProjectText, IdentityZeroAndOracle) {
  Rng rng(1);
  auto p = RegionAttnParams::init(3, 3, 4, 1, rng);
  p.w_t = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, true);
  auto x = oracle::random_matrix(rng, 4, 3);
  EXPECT_EQ(project_text(x, p).to_vector(), x.to_vector());
  p = random_params(rng, 5, 3, 4, 1);
  auto zero = project_text(Tensor::zeros({2, 5}), p);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(zero(i, e), p.b_t(0, e));
  auto t = oracle::random_matrix(rng, 4, 5);
  expect_near(project_text(t, p), 0, oracle::add_bias(oracle::naive_matmul(oracle::to_mat(t), oracle::to_mat(p.w_t)), p.b_t.to_vector()), 1e-13);
}

TEST(RegionCrossAttention, SingleSegmentReturnsItsValue) {
  Rng rng(2);
  auto p = random_params(rng, 4, 6, 5, 2);
  auto segs = random_segments(rng, 1, 3, 6);
  auto z = z_of(oracle::random_matrix(rng, 4, 4, false, 5.0), segs, p);
  auto v = oracle::naive_matmul(oracle::to_mat(segs[0]), oracle::to_mat(p.w_v));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t l = 0; l < 4; ++l)
      for (std::size_t e = 0; e < 6; ++e) EXPECT_NEAR(z(r * 4 + l, e), v[r][e], 1e-13);
}

TEST(RegionCrossAttention, SingleRegionIsStandardCrossAttention) {
  Rng rng(3);
  auto p = random_params(rng, 5, 4, 3, 2);
  auto segs = random_segments(rng, 4, 1, 4);
  auto text = oracle::random_matrix(rng, 3, 5);
  auto z = z_of(text, segs, p);
  auto q = oracle::naive_matmul(oracle::add_bias(oracle::naive_matmul(oracle::to_mat(text), oracle::to_mat(p.w_t)), p.b_t.to_vector()), oracle::to_mat(p.w_q));
  oracle::Mat rows;
  for (auto& s : segs) rows.push_back(oracle::to_mat(s)[0]);
  expect_near(z, 0, oracle::attention_oracle(q, oracle::naive_matmul(rows, oracle::to_mat(p.w_k)), oracle::naive_matmul(rows, oracle::to_mat(p.w_v)), 2), 1e-12);
}

TEST(RegionCrossAttention, MatchesLiteralLoopOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t heads = trial % 2 ? 1 : 2;
    const std::size_t r = trial < 5 ? 2 : 1 + rng.below(3), k = trial < 5 ? 3 : 1 + rng.below(4),
                      l = trial < 5 ? 2 : 1 + rng.below(4), ev = heads * (1 + rng.below(3)), et = 1 + rng.below(5),
                      eo = 1 + rng.below(4);
    auto p = random_params(rng, et, ev, eo, heads);
    auto segs = random_segments(rng, k, r, ev);
    auto text = oracle::random_matrix(rng, l, et);
    auto want_z = oracle::region_z_oracle(oracle::to_mat(text), mats(segs), to_oracle(p));
    auto z = z_of(text, segs, p);
    for (std::size_t a = 0; a < r; ++a) expect_near(z, a * l, want_z[a], 1e-12);
    auto o = region_attend(text, memory_of(segs), r, p);
    expect_near(o, 0, oracle::pool_project_oracle(want_z, to_oracle(p)), 1e-12);
  }
}

TEST(RegionCrossAttention, WeightsSumToOnePerRegionHeadAndPosition) {
  Rng rng(5);
  auto p = random_params(rng, 3, 4, 2, 2);
  num::AttentionProbs probs;
  z_of(oracle::random_matrix(rng, 3, 3), random_segments(rng, 5, 2, 4), p, &probs);
  ASSERT_EQ(probs.values.size(), 2u * 2u * 3u * 5u);
  for (std::size_t row = 0; row < probs.values.size() / 5; ++row) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += probs.values[row * 5 + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(RegionCrossAttention, SegmentPermutationLeavesZAndRegionPermutationLeavesO) {
  Rng rng(6);
  auto p = random_params(rng, 3, 4, 5, 2);
  auto segs = random_segments(rng, 4, 3, 4);
  auto text = oracle::random_matrix(rng, 2, 3);
  auto z = z_of(text, segs, p);
  auto shuffled = segs;
  std::swap(shuffled[0], shuffled[3]);
  std::swap(shuffled[1], shuffled[2]);
  auto z2 = z_of(text, shuffled, p);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_NEAR(z.data()[i], z2.data()[i], 1e-13);

  // Regions reversed: Z blocks reverse, O is unchanged.
  std::vector<Tensor> flipped;
  for (auto& s : segs) {
    auto m = oracle::to_mat(s);
    flipped.push_back(Tensor::matrix({{m[2][0], m[2][1], m[2][2], m[2][3]},
                                      {m[1][0], m[1][1], m[1][2], m[1][3]},
                                      {m[0][0], m[0][1], m[0][2], m[0][3]}}));
  }
  auto z3 = z_of(text, flipped, p);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t e = 0; e < 4; ++e) EXPECT_NEAR(z3((2 - r) * 2 + l, e), z(r * 2 + l, e), 1e-13);
  auto o1 = region_attend(text, memory_of(segs), 3, p);
  auto o2 = region_attend(text, memory_of(flipped), 3, p);
  for (std::size_t i = 0; i < o1.numel(); ++i) EXPECT_NEAR(o1.data()[i], o2.data()[i], 1e-13);
}

TEST(PoolAndProject, DegenerateCases) {
  Rng rng(7);
  auto p = random_params(rng, 3, 3, 3, 1);
  p.w_o = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, true);
  p.b_o = Tensor::zeros({1, 3}, true);
  auto z = oracle::random_matrix(rng, 4, 3);
  const RegionBatchItem one{0, 4, 0, 1, 1};
  EXPECT_EQ(pool_and_project(z, {&one, 1}, p).to_vector(), z.to_vector());
  auto rows = oracle::random_matrix(rng, 2, 3);
  std::vector<Tensor> parts{rows, rows, rows};
  const RegionBatchItem three{0, 2, 0, 1, 3};
  auto o = pool_and_project(num::concat_rows(parts), {&three, 1}, p);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(o.data()[i], rows.data()[i], 1e-15);
}

TEST(RegionCrossAttention, PackedBatchEqualsPerSampleResults) {
  Rng rng(8);
  auto p = random_params(rng, 3, 4, 2, 2);
  auto t1 = oracle::random_matrix(rng, 2, 3), t2 = oracle::random_matrix(rng, 3, 3);
  auto s1 = random_segments(rng, 2, 2, 4), s2 = random_segments(rng, 3, 2, 4);
  auto o1 = region_attend(t1, memory_of(s1), 2, p);
  auto o2 = region_attend(t2, memory_of(s2), 2, p);
  std::vector<Tensor> texts{t1, t2}, mems{memory_of(s1), memory_of(s2)};
  const RegionBatchItem items[] = {{0, 2, 0, 2, 2}, {2, 3, 4, 3, 2}};
  auto z = region_cross_attention(project_text(num::concat_rows(texts), p), num::concat_rows(mems), items, p);
  auto o = pool_and_project(z, items, p);
  for (std::size_t i = 0; i < o1.numel(); ++i) EXPECT_NEAR(o.data()[i], o1.data()[i], 1e-14);
  for (std::size_t i = 0; i < o2.numel(); ++i) EXPECT_NEAR(o.data()[o1.numel() + i], o2.data()[i], 1e-14);
}

TEST(RegionCrossAttention, InvalidConfigurations) {
  Rng rng(9);
  EXPECT_THROW(RegionAttnParams::init(3, 5, 2, 2, rng), ConfigError);
  auto p = random_params(rng, 3, 4, 2, 1);
  const RegionBatchItem empty{0, 2, 0, 0, 2};
  EXPECT_THROW(region_cross_attention(project_text(oracle::random_matrix(rng, 2, 3), p),
                                      oracle::random_matrix(rng, 2, 4), {&empty, 1}, p),
               NumericError);
}

TEST(RegionCrossAttention, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  auto p = random_params(rng, 3, 4, 3, 2);
  auto text = oracle::random_matrix(rng, 2, 3, true);
  auto mem = memory_of(random_segments(rng, 3, 2, 4));
  auto probe = oracle::random_matrix(rng, 2, 3);
  auto loss = [&] { return num::sum_all(num::mul(region_attend(text, mem, 2, p), probe)); };
  for (auto* t : {&p.w_t, &p.b_t, &p.w_q, &p.w_k, &p.w_v, &p.w_o, &p.b_o, &text}) {
    auto r = oracle::check_gradient(loss, *t);
    EXPECT_LT(r.rel_error, 1e-4);
    EXPECT_GT(r.numeric_norm, 1e-8);
  }
}
