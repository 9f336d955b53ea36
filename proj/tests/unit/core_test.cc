#include <random>

#include <gtest/gtest.h>

#include "rsstitch/core.h"
#include "testing/oracles.h"

namespace rsstitch {
namespace {

const RsParams kRs{1.0, 720.0};

TEST(Beta, FirstScanlineIsReferencePose) { EXPECT_EQ(Beta1(0.0, 0.0, kRs), 0.0); }

TEST(Beta, Beta1LastScanline) {
  EXPECT_DOUBLE_EQ(Beta1(0.0, 720.0, kRs), 1.0);
  EXPECT_DOUBLE_EQ(Beta1(2.0, 720.0, kRs), 1.0);
}

TEST(Beta, Beta2AtZeroIsOneForAnyK) {
  for (double k : {-1.9, -1.0, 0.0, 0.5, 3.0, 10.0}) EXPECT_NEAR(Beta2(k, 0.0, kRs), 1.0, 1e-15);
}

TEST(Beta, Beta2Values) {
  EXPECT_DOUBLE_EQ(Beta2(0.0, 720.0, kRs), 2.0);
  EXPECT_DOUBLE_EQ(Beta2(0.0, 360.0, kRs), 1.5);
}

TEST(Beta, DifferenceIdentities) {
  for (double k : {-1.5, 0.0, 1.0, 4.0}) EXPECT_NEAR(Beta(k, 0.0, 0.0, kRs), 1.0, 1e-15);
  const RsParams gs{0.0, 720.0};
  for (double k : {-1.5, 0.0, 1.0})
    for (double y1 : {0.0, 100.0, 719.0})
      for (double y2 : {0.0, 333.0, 700.0}) EXPECT_NEAR(Beta(k, y1, y2, gs), 1.0, 1e-15);
  for (double g : {0.3, 1.0}) {
    const RsParams rs{g, 720.0};
    EXPECT_NEAR(Beta(0.0, 100.0, 400.0, rs), 1.0 + g * 300.0 / 720.0, 1e-14);
  }
}

TEST(Beta, MatchesOracleOnGrid) {
  for (double k : {-1.9, -0.7, 0.0, 0.3, 2.5, 9.0})
    for (double y = -50.0; y <= 800.0; y += 37.0) {
      EXPECT_NEAR(Beta1(k, y, kRs), oracle::B1(k, y, 1.0, 720.0), 1e-13);
      EXPECT_NEAR(Beta2(k, y, kRs), oracle::B2(k, y, 1.0, 720.0), 1e-13);
    }
}

TEST(Beta, RejectsKAtOrBelowMinusTwo) {
  EXPECT_THROW(Beta1(-2.0, 10.0, kRs), Error);
  EXPECT_THROW(Beta2(-3.0, 10.0, kRs), Error);
}

TEST(FlowGs, ScaledIdentityAndZeroGiveNoFlow) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1000, 1000);
  for (int i = 0; i < 50; ++i) {
    const Pixel p(U(rng), U(rng));
    const double eps = U(rng);
    EXPECT_LT(FlowGs(eps * Matrix3::Identity(), p).norm(), 1e-9 * (1 + std::abs(eps) * p.squaredNorm()));
    EXPECT_EQ(FlowGs(Matrix3::Zero(), p).norm(), 0.0);
  }
}

TEST(FlowGs, MatchesInstantaneousMotionFormulas) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N(0, 1);
  for (int i = 0; i < 100; ++i) {
    const Vector3 w(0.01 * N(rng), 0.01 * N(rng), 0.01 * N(rng));
    const Vector3 v(0.02 * N(rng), 0.02 * N(rng), 0.02 * N(rng));
    const Vector3 n = Vector3(0.2 * N(rng), 0.2 * N(rng), 1.0).normalized();
    const double d = 0.5 + std::abs(N(rng));
    const Matrix3 H = -(Skew(w) + v * n.transpose() / d);
    const Pixel p(0.5 * N(rng), 0.5 * N(rng));
    EXPECT_LT((FlowGs(H, p) - oracle::MotionFlow(w, v, n, d, p)).norm(), 1e-14);
  }
}

TEST(FlowGs, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const Pixel p(300.0, 200.0);
  const Eigen::Matrix2d J = FlowGsJacobian(H, p);
  const double e = 1e-4;
  for (int c = 0; c < 2; ++c) {
    Pixel dp = Pixel::Zero();
    dp[c] = e;
    const Eigen::Vector2d fd = (FlowGs(H, p + dp) - FlowGs(H, p - dp)) / (2 * e);
    EXPECT_LT((J.col(c) - fd).norm(), 1e-6);
  }
}

TEST(FlowRs, GsLimitAndAnchorScanline) {
  std::mt19937_64 rng(4);
  const Matrix3 H = oracle::RandomDiffH(rng);
  RsDiffModel gs{H, 0.7, {0.0, 720.0}};
  const Pixel p(400.0, 500.0);
  EXPECT_EQ(FlowRs(gs, p, 530.0), FlowGs(H, p));
  RsDiffModel rs{H, 0.7, {1.0, 720.0}};
  EXPECT_LT((FlowRs(rs, Pixel(400.0, 0.0), 0.0) - FlowGs(H, Pixel(400.0, 0.0))).norm(), 1e-12);
}

TEST(FlowRs, ForwardOracleConsistency) {
  std::mt19937_64 rng(5);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const RsDiffModel m{H, 0.8, kRs};
  for (const Correspondence& c : oracle::RsPairs(H, 0.8, 1.0, 720.0, 1280.0, 50, rng)) {
    EXPECT_LT((FlowRs(m, c.p1, c.p2().y()) - c.u).norm(), 1e-9);
  }
}

TEST(FlowCoeffRows, NullDirectionAndCrossCheck) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-500, 1500);
  const HVector vi = VecRowMajor(Matrix3::Identity());
  for (int i = 0; i < 100; ++i) {
    const Pixel p(U(rng), U(rng));
    const FlowRows b = FlowCoeffRows(p);
    EXPECT_LT((b * vi).norm(), 1e-9);
    Matrix3 H = Matrix3::Random();
    EXPECT_LT((b * VecRowMajor(H) - oracle::Flow(H, p)).norm(), 1e-8 * (1 + p.squaredNorm()));
  }
  Matrix3 H = Matrix3::Random();
  EXPECT_EQ(FlowCoeffRows(Pixel::Zero()) * VecRowMajor(H), Eigen::Vector2d(H(0, 2), H(1, 2)));
}

TEST(VecRowMajor, RoundTrip) {
  Matrix3 H;
  H << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const HVector h = VecRowMajor(H);
  EXPECT_EQ(h[1], 2.0);
  EXPECT_EQ(h[3], 4.0);
  EXPECT_EQ(UnvecRowMajor(h), H);
}

TEST(Normalization, HandComputedTwoPoints) {
  const std::vector<Pixel> pts{{0, 0}, {2, 0}};
  const Normalization n = ComputeNormalization(pts);
  EXPECT_NEAR(n.centroid.x(), 1.0, 1e-15);
  EXPECT_NEAR(n.scale, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR((n.Apply(pts[0]) - Pixel(-std::sqrt(2.0), 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((n.Apply(pts[1]) - Pixel(std::sqrt(2.0), 0)).norm(), 0.0, 1e-15);
}

TEST(Normalization, NormalizedSetIsFixedPoint) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0, 1000);
  std::vector<Correspondence> c;
  for (int i = 0; i < 20; ++i) c.push_back({Pixel(U(rng), U(rng)), Flow(U(rng) / 100, 1.0)});
  const NormalizedSet once = HartleyNormalize(c);
  const NormalizedSet twice = HartleyNormalize(once.corrs);
  EXPECT_NEAR(twice.transform.scale, 1.0, 1e-12);
  EXPECT_LT(twice.transform.centroid.norm(), 1e-12);
  for (size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((twice.corrs[i].u - once.corrs[i].u).norm(), 1e-12);
  }
}

TEST(Normalization, DiffConjugationPreservesFlowAndGauge) {
  std::mt19937_64 rng(8);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const std::vector<Pixel> pts{{10, 20}, {900, 40}, {500, 600}};
  const Normalization n = ComputeNormalization(pts);
  const Matrix3 Hn = n.NormalizeDiff(H);
  for (const Pixel& p : pts) {
    EXPECT_LT((n.ApplyFlow(FlowGs(H, p)) - FlowGs(Hn, n.Apply(p))).norm(), 1e-9);
  }
  EXPECT_LT((n.DenormalizeDiff(Hn) - H).norm(), 1e-9 * H.norm());
  EXPECT_LT((n.NormalizeDiff(Matrix3::Identity()) - Matrix3::Identity()).norm(), 1e-12);
}

TEST(Normalization, CoincidentPointsThrow) {
  const std::vector<Pixel> pts{{3, 3}, {3, 3}};
  EXPECT_THROW(ComputeNormalization(pts), Error);
}

TEST(Validate, RejectsNonFiniteAndHugeFlows) {
  std::vector<Correspondence> c{{Pixel(1, 1), Flow(1, 1)}};
  EXPECT_NO_THROW(ValidateCorrespondences(c, 100.0));
  c.push_back({Pixel(1, 1), Flow(1000, 0)});
  EXPECT_THROW(ValidateCorrespondences(c, 100.0), Error);
  EXPECT_NO_THROW(ValidateCorrespondences(c, 0.0));
  c.push_back({Pixel(std::nan(""), 1), Flow(0, 0)});
  EXPECT_THROW(ValidateCorrespondences(c, 0.0), Error);
}

TEST(RsParams, Validate) {
  EXPECT_NO_THROW((RsParams{0.0, 10.0}.Validate()));
  EXPECT_THROW((RsParams{1.1, 10.0}.Validate()), Error);
  EXPECT_THROW((RsParams{0.5, 0.0}.Validate()), Error);
}

}  // namespace
}  // namespace rsstitch
