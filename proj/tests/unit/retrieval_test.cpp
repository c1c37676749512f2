#include <gtest/gtest.h>

#include <cmath>

#include "gvmt/errors.h"
#include "gvmt/retrieval/retrieval.h"
#include "oracles/retrieval_oracle.h"

using namespace gvmt;
using namespace gvmt::retrieval;
using gvmt::num::Rng;
using gvmt::num::Tensor;
namespace oracle = gvmt::testing;

namespace {

data::VideoEmbeddings make_emb(std::vector<std::vector<double>> v) {
  const std::size_t dim = v.front().size();
  return {"vid", dim, std::move(v)};
}

std::vector<std::vector<double>> random_vectors(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<std::vector<double>> v(n, std::vector<double>(dim));
  for (auto& row : v)
    for (auto& x : row) x = rng.normal();
  return v;
}

std::vector<Tensor> grids(const std::vector<std::vector<double>>& flat, std::size_t r, std::size_t e) {
  std::vector<Tensor> out;
  for (const auto& f : flat) out.push_back(Tensor::from_data({r, e}, f));
  return out;
}

}  // namespace

TEST(Index, SingleEmbeddingAndNormalization) {
  auto idx = build_index(make_emb({{3, 4}}));
  EXPECT_EQ(idx.size(), 1u);
  EXPECT_DOUBLE_EQ(idx.row(0)[0], 0.6);
  EXPECT_DOUBLE_EQ(idx.row(0)[1], 0.8);
}

TEST(Index, DimensionMismatchAndZeroVectorAreErrors) {
  EXPECT_THROW(build_index(make_emb({{1, 0}, {1, 0, 0}})), DataError);
  EXPECT_THROW(build_index(make_emb({{0, 0}})), DataError);
  EXPECT_THROW(build_index(data::VideoEmbeddings{"v", 4, {}}), DataError);
}

TEST(TopP, WorkedExample) {
  const double s = 1.0 / std::sqrt(2.0);
  auto idx = build_index(make_emb({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {s, s, 0}}));
  EXPECT_EQ(retrieve_top_p(idx, 0, 2), (std::vector<std::size_t>{0, 3}));
}

TEST(TopP, FullAndClampedP) {
  Rng rng(1);
  auto idx = build_index(make_emb(random_vectors(rng, 6, 5)));
  const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  EXPECT_EQ(retrieve_top_p(idx, 3, 6), all);
  EXPECT_EQ(retrieve_top_p(idx, 3, 50), all);
  EXPECT_EQ(retrieve_top_p(idx, 3, 1), (std::vector<std::size_t>{3}));
  EXPECT_THROW(retrieve_top_p(idx, 3, 0), ConfigError);
  EXPECT_THROW(retrieve_top_p(idx, 6, 2), DataError);
}

TEST(TopP, DuplicateVectorsTieToLowerIndex) {
  // Query 0 = (1,0); idx 2 and 5 hold the same direction (1,1); others are far.
  auto idx = build_index(make_emb({{1, 0}, {-1, 0.1}, {1, 1}, {-1, -0.2}, {-0.5, -1}, {1, 1}}));
  EXPECT_EQ(retrieve_top_p(idx, 0, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(retrieve_top_p(idx, 0, 3), (std::vector<std::size_t>{0, 2, 5}));
}

TEST(TopP, MatchesExhaustiveScanOnRandomVideos) {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    const std::size_t dim = 2 + rng.below(20);
    auto v = random_vectors(rng, n, dim);
    if (n > 3) v[n - 1] = v[1];  // an exact tie
    auto idx = build_index(make_emb(v));
    const std::size_t q = rng.below(n);
    for (std::size_t p = 1; p <= n; ++p) {
      ASSERT_EQ(retrieve_top_p(idx, q, p), oracle::brute_force_top_p(v, q, p)) << "trial " << trial << " P=" << p;
    }
  }
}

TEST(TopP, LargeIndexMatchesPreBuildScan) {
  Rng rng(8);
  auto v = random_vectors(rng, 1000, 16);
  auto idx = build_index(make_emb(v));
  for (std::size_t q : {0u, 17u, 999u})
    for (std::size_t p : {1u, 10u, 333u}) EXPECT_EQ(retrieve_top_p(idx, q, p), oracle::brute_force_top_p(v, q, p));
}

TEST(TopP, ScaleInvariant) {
  Rng rng(4);
  auto v = random_vectors(rng, 30, 8);
  auto scaled = v;
  for (auto& row : scaled) {
    const double a = 0.01 + 100 * rng.uniform();
    for (auto& x : row) x *= a;
  }
  auto i1 = build_index(make_emb(v));
  auto i2 = build_index(make_emb(scaled));
  for (std::size_t q = 0; q < 30; q += 7)
    for (std::size_t p = 1; p <= 30; p += 4) EXPECT_EQ(retrieve_top_p(i1, q, p), retrieve_top_p(i2, q, p));
}

TEST(TopP, ScoresAreCosines) {
  auto idx = build_index(make_emb({{1, 0}, {1, 1}, {0, 2}}));
  auto s = retrieve_scored(idx, 0, 3);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_NEAR(s[0].similarity, 1.0, 1e-15);
  EXPECT_NEAR(s[1].similarity, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[2].similarity, 0.0, 1e-15);
}

TEST(FuseNeighbors, WorkedExample) {
  auto f = grids({{0, 1}, {1, 0}, {2, 2}}, 1, 2);
  auto out = fuse_neighbors(f, 1, {1, 0.1});
  EXPECT_NEAR(out(0, 0), 1.2, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.3, 1e-15);
}

TEST(FuseNeighbors, ZeroGammaIsIdentityAndWindowClamps) {
  Rng rng(2);
  auto flat = random_vectors(rng, 5, 6);
  auto f = grids(flat, 2, 3);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(fuse_neighbors(f, j, {2, 0.0}).to_vector(), flat[j]);
  auto out = fuse_neighbors(f, 0, {2, 0.5});
  for (std::size_t e = 0; e < 6; ++e) EXPECT_NEAR(out.data()[e], flat[0][e] + 0.5 * (flat[1][e] + flat[2][e]), 1e-14);
}

TEST(FuseNeighbors, MatchesOracleAndIsLinear) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    auto flat = random_vectors(rng, n, 4);
    const FusionConfig cfg{rng.below(4), rng.uniform()};
    const double a = rng.uniform(-3, 3);
    auto scaled = flat;
    for (auto& row : scaled)
      for (auto& x : row) x *= a;
    auto f = grids(flat, 2, 2);
    auto fs = grids(scaled, 2, 2);
    for (std::size_t j = 0; j < n; ++j) {
      auto want = oracle::fuse_oracle(flat, j, cfg.w, cfg.gamma);
      auto got = fuse_neighbors(f, j, cfg).to_vector();
      auto got_scaled = fuse_neighbors(fs, j, cfg).to_vector();
      for (std::size_t e = 0; e < 4; ++e) {
        EXPECT_NEAR(got[e], want[e], 1e-12);
        EXPECT_NEAR(got_scaled[e], a * got[e], 1e-12);
      }
    }
  }
}

TEST(GlobalSet, SingleSegmentAndRawFeatureCases) {
  Rng rng(5);
  auto v = random_vectors(rng, 7, 8);
  auto flat = random_vectors(rng, 7, 6);
  auto f = grids(flat, 3, 2);
  auto idx = build_index(make_emb(v));
  auto one = build_global_set(idx, f, 4, 1, {2, 0.1});
  EXPECT_EQ(one.indices, (std::vector<std::size_t>{4}));
  EXPECT_EQ(one.features.size(), 1u);
  auto all = build_global_set(idx, f, 4, 7, {2, 0.0});
  for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(all.features[j].to_vector(), flat[j]);
}

TEST(GlobalSet, EqualsComposedOracles) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    auto v = random_vectors(rng, 12, 10);
    auto flat = random_vectors(rng, 12, 8);
    auto f = grids(flat, 2, 4);
    auto idx = build_index(make_emb(v));
    const std::size_t q = rng.below(12);
    auto set = build_global_set(idx, f, q, 5, {2, 0.1});
    auto want = oracle::brute_force_top_p(v, q, 5);
    ASSERT_EQ(set.indices, want);
    for (std::size_t k = 0; k < want.size(); ++k) {
      auto fused = oracle::fuse_oracle(flat, want[k], 2, 0.1);
      for (std::size_t e = 0; e < 8; ++e) EXPECT_NEAR(set.features[k].data()[e], fused[e], 1e-12);
    }
  }
}

TEST(GlobalSet, MissingFeaturesIsAnError) {
  auto idx = build_index(make_emb({{1, 0}, {0, 1}, {1, 1}}));
  auto f = grids({{1}, {2}}, 1, 1);
  EXPECT_THROW(build_global_set(idx, f, 0, 3, {}), DataError);
}
