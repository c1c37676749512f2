#include <gtest/gtest.h>

#include <cmath>

#include "gvmt/bifusion/bifusion.h"
#include "gvmt/numerics/ops.h"
#include "oracles/attention_oracle.h"
#include "oracles/finite_diff.h"

using namespace gvmt;
using namespace gvmt::bifusion;
using gvmt::num::Rng;
using gvmt::num::Tensor;
namespace oracle = gvmt::testing;

namespace {

void expect_near(const Tensor& t, const oracle::Mat& m, double tol) {
  ASSERT_EQ(t.rows(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) EXPECT_NEAR(t(i, j), m[i][j], tol);
}

}  // namespace

TEST(T2V, SinglePositionAndOrthogonalCases) {
  Rng rng(1);
  auto o = oracle::random_matrix(rng, 1, 4);
  auto h = t2v_attention(oracle::random_matrix(rng, 1, 4), o);
  EXPECT_EQ(h.to_vector(), o.to_vector());
  // T rows orthogonal to every O row: uniform weights, output is the mean of O.
  auto t = Tensor::matrix({{1, 0, 0, 0}, {0, 2, 0, 0}});
  auto o2 = Tensor::matrix({{0, 0, 1, 2}, {0, 0, -3, 1}});
  auto h2 = t2v_attention(t, o2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(h2(i, 2), -1.0, 1e-15);
    EXPECT_NEAR(h2(i, 3), 1.5, 1e-15);
  }
}

TEST(T2V, MatchesExplicitLoopOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = oracle::random_matrix(rng, 2, 5, false, 2.0), o = oracle::random_matrix(rng, 2, 5, false, 2.0);
    expect_near(t2v_attention(t, o), oracle::attention_oracle(oracle::to_mat(t), oracle::to_mat(o), oracle::to_mat(o)), 1e-13);
  }
}

TEST(V2T, MirrorCases) {
  Rng rng(3);
  auto t = oracle::random_matrix(rng, 1, 3);
  EXPECT_EQ(v2t_attention(oracle::random_matrix(rng, 1, 3), t).to_vector(), t.to_vector());
  auto x = oracle::random_matrix(rng, 3, 4);
  EXPECT_EQ(v2t_attention(x, x).to_vector(), t2v_attention(x, x).to_vector());
  for (int trial = 0; trial < 10; ++trial) {
    auto o = oracle::random_matrix(rng, 3, 4, false, 2.0), tt = oracle::random_matrix(rng, 3, 4, false, 2.0);
    expect_near(v2t_attention(o, tt), oracle::attention_oracle(oracle::to_mat(o), oracle::to_mat(tt), oracle::to_mat(tt)), 1e-13);
  }
}

TEST(GatedFuse, LimitsAndHalfGate) {
  Rng rng(4);
  auto a = oracle::random_matrix(rng, 2, 3), b = oracle::random_matrix(rng, 2, 3), t = oracle::random_matrix(rng, 2, 3);
  auto hi = gated_fuse(a, b, t, GateParams::init(3, 800.0));
  auto lo = gated_fuse(a, b, t, GateParams::init(3, -800.0));
  auto half = gated_fuse(a, b, t, GateParams::init(3, 0.0));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(hi.data()[i], a.data()[i], 1e-12);
    EXPECT_NEAR(lo.data()[i], b.data()[i] + t.data()[i], 1e-12);
    EXPECT_NEAR(half.data()[i], 0.5 * (a.data()[i] + b.data()[i] + t.data()[i]), 1e-15);
  }
}

TEST(GatedFuse, LinearAndCoefficientsBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto gate = GateParams{oracle::random_matrix(rng, 1, 4, true, 6.0)};
    auto a = oracle::random_matrix(rng, 3, 4), b = oracle::random_matrix(rng, 3, 4), t = oracle::random_matrix(rng, 3, 4);
    const double s = rng.uniform(-4, 4);
    auto f = gated_fuse(a, b, t, gate);
    auto fs = gated_fuse(num::scale(a, s), num::scale(b, s), num::scale(t, s), gate);
    for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_NEAR(fs.data()[i], s * f.data()[i], 1e-12);
    auto g = gate.gate();
    for (double x : g.data()) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
      EXPECT_DOUBLE_EQ((1.0 - x) + x, 1.0);
    }
  }
}

TEST(Bifuse, PackedSpansEqualPerSample) {
  Rng rng(6);
  auto gate = GateParams{oracle::random_matrix(rng, 1, 3, true)};
  auto t1 = oracle::random_matrix(rng, 2, 3), o1 = oracle::random_matrix(rng, 2, 3);
  auto t2 = oracle::random_matrix(rng, 3, 3), o2 = oracle::random_matrix(rng, 3, 3);
  std::vector<Tensor> ts{t1, t2}, os{o1, o2};
  const RowSpan spans[] = {{0, 2}, {2, 3}};
  auto f = bifuse(num::concat_rows(ts), num::concat_rows(os), gate, spans);
  auto f1 = bifuse(t1, o1, gate), f2 = bifuse(t2, o2, gate);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(f.data()[i], f1.data()[i], 1e-14);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(f.data()[6 + i], f2.data()[i], 1e-14);
}

TEST(Bifuse, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  auto gate = GateParams{oracle::random_matrix(rng, 1, 4, true)};
  auto t = oracle::random_matrix(rng, 3, 4, true), o = oracle::random_matrix(rng, 3, 4, true);
  auto probe = oracle::random_matrix(rng, 3, 4);
  auto loss = [&] { return num::sum_all(num::mul(bifuse(t, o, gate), probe)); };
  for (auto* x : {&gate.raw_gate, &t, &o}) {
    auto r = oracle::check_gradient(loss, *x);
    EXPECT_LT(r.rel_error, 1e-4);
    EXPECT_GT(r.numeric_norm, 1e-8);
  }
}
