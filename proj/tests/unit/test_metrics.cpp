#include "infoprio/metrics.hpp"
#include "infoprio/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace infoprio;
using namespace infoprio::metrics;

namespace {

std::vector<Vec> random_points(int n, int dim, Rng& r) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) {
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = r.normal();
    pts.push_back(v);
  }
  return pts;
}

}  // namespace

TEST(Graph, ScaledWeights) {
  const auto g = SimilarityGraph::build({Vec{{0.0, 0.0}}, Vec{{1.0, 0.0}}, Vec{{3.0, 0.0}}});
  ASSERT_EQ(g.edges(), 3u);
  EXPECT_EQ(g.weight(0, 1), 1.0);
  EXPECT_EQ(g.weight(0, 2), 3.0);
  EXPECT_EQ(g.weight(1, 2), 2.0);
  EXPECT_EQ(g.labels(), (std::vector<int>{1, 2, 3}));
}

TEST(Graph, RejectsDegenerateInput) {
  EXPECT_THROW(SimilarityGraph::build({Vec{{1.0}}}), DomainError);
  EXPECT_THROW(SimilarityGraph::build({Vec{{1.0}}, Vec{{1.0}}, Vec{{2.0}}}), DomainError);
}

TEST(Kernel, WorkedExample) {
  const auto g1 = SimilarityGraph::from_weights(3, {1, 2, 3});
  const auto g2 = SimilarityGraph::from_weights(3, {1, 2, 4});
  KernelConfig kc;
  kc.ridge_width = 2.0;
  EXPECT_NEAR(shortest_path_kernel(g1, g2, kc), 2.5 / 3.0, 1e-15);
  EXPECT_EQ(shortest_path_kernel(g1, g2, kc), shortest_path_kernel_naive(g1, g2, kc));
}

TEST(Kernel, SelfSimilarityIsExactlyOne) {
  Rng r(1);
  for (int t = 0; t < 20; ++t) {
    const auto g = SimilarityGraph::build(random_points(3 + t % 10, 3, r));
    EXPECT_EQ(shortest_path_kernel(g, g), 1.0);
  }
}

TEST(Kernel, FastPathMatchesNaiveBitExactly) {
  Rng r(2);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + r.uniform_int(15);
    const auto g1 = SimilarityGraph::build(random_points(n, 2, r));
    const auto g2 = SimilarityGraph::build(random_points(n, 4, r));
    EXPECT_EQ(shortest_path_kernel(g1, g2), shortest_path_kernel_naive(g1, g2)) << t;
  }
}

TEST(Kernel, PaperLiteralModeMatchesNaive) {
  Rng r(3);
  KernelConfig kc;
  kc.vertex_kernel = VertexKernel::kPaperLiteral;
  const auto g1 = SimilarityGraph::build(random_points(6, 2, r));
  const auto g2 = SimilarityGraph::build(random_points(6, 2, r));
  const double k = shortest_path_kernel(g1, g2, kc);
  EXPECT_EQ(k, shortest_path_kernel_naive(g1, g2, kc));
  EXPECT_GE(k, 0.0);
}

TEST(Similarity, IsometryGivesOne) {
  Rng r(4);
  const auto gt = random_points(20, 3, r);
  const Eigen::Matrix3d q = Eigen::Quaterniond(Eigen::Vector4d(0.3, -0.5, 0.2, 0.7).normalized()).toRotationMatrix();
  std::vector<Vec> lat;
  for (const auto& p : gt) lat.push_back(2.5 * (q * p) + Vec::Constant(3, 4.0));
  EXPECT_NEAR(behavioral_similarity(lat, gt), 1.0, 1e-9);
}

TEST(Similarity, NoiseScoresBelowIsometry) {
  for (int s = 0; s < 10; ++s) {
    Rng r(static_cast<std::uint64_t>(100 + s));
    const auto gt = random_points(64, 2, r);
    const auto noise = random_points(64, 2, r);
    EXPECT_LT(behavioral_similarity(noise, gt), 1.0 - 1e-6);
  }
}

TEST(Similarity, TwoPointsAlwaysOne) {
  EXPECT_EQ(behavioral_similarity({Vec{{0.0}}, Vec{{5.0}}}, {Vec{{1.0, 1.0}}, Vec{{2.0, 7.0}}}), 1.0);
}

TEST(Similarity, DistinctIndicesKeepFirstOccurrence) {
  const std::vector<Vec> gt = {Vec{{1.0}}, Vec{{2.0}}, Vec{{1.0}}, Vec{{3.0}}, Vec{{2.0}}};
  EXPECT_EQ(distinct_indices(gt), (std::vector<std::size_t>{0, 1, 3}));
}

TEST(Probe, CopiedCoordinateGivesOne) {
  Rng r(5);
  Mat z(3, 200);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = r.normal();
  const Mat t = z.row(1);
  EXPECT_NEAR(linear_probe(z, t, 1).r2, 1.0, 1e-9);
}

TEST(Probe, IndependentTargetsGiveNearZero) {
  Rng r(6);
  Mat z(3, 2000), t(2, 2000);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = r.normal();
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.normal();
  EXPECT_LT(std::abs(linear_probe(z, t, 2).r2), 0.02);
}

TEST(Probe, AdditiveNoiseMatchesAnalyticR2) {
  Rng r(7);
  const int n = 4000;
  Mat s(2, n), z(2, n);
  for (int i = 0; i < n; ++i) {
    s(0, i) = r.normal();
    s(1, i) = r.normal();
  }
  const Mat a{{1.0, 0.4}, {-0.3, 1.0}};
  z = a * s;
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] += 0.1 * r.normal();
  // Regressing the factors on z: residual variance is set by the noise mapped
  // back through A^{-1}.
  const Mat ainv = a.inverse();
  const Vec resid = (ainv * ainv.transpose()).diagonal() * 0.01;
  double expected = 0.0;
  for (int k = 0; k < 2; ++k) expected += 1.0 / (1.0 + resid[k]) / 2.0;
  EXPECT_NEAR(linear_probe(z, s, 3).r2, expected, 0.05);
  EXPECT_NEAR(expected, 1.0 / (1.0 + 0.01), 0.02);
}

TEST(Probe, RankDeficiencyIsFlagged) {
  Rng r(8);
  Mat z(3, 100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    z(0, i) = r.normal();
    z(1, i) = 2.0 * z(0, i);
    z(2, i) = r.normal();
  }
  const auto p = linear_probe(z, z.row(2), 1);
  EXPECT_TRUE(p.rank_deficient);
  EXPECT_NEAR(p.r2, 1.0, 1e-9);
}
