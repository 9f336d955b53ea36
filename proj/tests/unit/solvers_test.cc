#include <random>

#include <gtest/gtest.h>

#include "rsstitch/solvers.h"
#include "testing/invariance.h"
#include "testing/oracles.h"

namespace rsstitch {
namespace {

const RsParams kRs{1.0, 720.0};

double MaxFlowError(const RsDiffModel& m, const std::vector<Correspondence>& c) {
  double e = 0.0;
  for (const Correspondence& x : c) e = std::max(e, (invariance::Predict(m, x) - x.u).norm());
  return e;
}

std::vector<Correspondence> DiscretePairs(const Matrix3& H, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> X(0, 1279), Y(0, 719);
  std::vector<Correspondence> c;
  for (int i = 0; i < n; ++i) {
    const Pixel p(X(rng), Y(rng));
    c.push_back(Correspondence::FromPoints(p, oracle::Transfer(H, p)));
  }
  return c;
}

Matrix3 SomeDiscreteH() {
  Matrix3 H;
  H << 1.02, 0.01, -15.0, -0.02, 0.99, 7.0, 1e-5, -2e-5, 1.0;
  return H;
}

TEST(GsDiscrete, FourExactPointsRecoverTransfer) {
  std::mt19937_64 rng(1);
  const Matrix3 H = SomeDiscreteH();
  const auto c = DiscretePairs(H, 4, rng);
  const Matrix3 E = SolveGsDiscrete(c);
  for (const auto& x : DiscretePairs(H, 50, rng)) {
    EXPECT_LT((oracle::Transfer(E, x.p1) - x.p2()).norm(), 1e-8);
  }
  EXPECT_NEAR(E.norm(), 1.0, 1e-12);
}

TEST(GsDiscrete, IdentityMotion) {
  std::vector<Correspondence> c{{Pixel(0, 0), Flow::Zero()},
                                {Pixel(100, 0), Flow::Zero()},
                                {Pixel(0, 100), Flow::Zero()},
                                {Pixel(120, 90), Flow::Zero()}};
  const Matrix3 E = SolveGsDiscrete(c);
  EXPECT_LT((E / E(2, 2) - Matrix3::Identity()).norm(), 1e-12);
}

TEST(GsDiscrete, CollinearSampleIsDegenerate) {
  std::vector<Correspondence> c{{Pixel(0, 0), Flow(1, 0)},
                                {Pixel(10, 10), Flow(1, 0)},
                                {Pixel(20, 20), Flow(1, 0)},
                                {Pixel(50, 0), Flow(1, 0)}};
  try {
    SolveGsDiscrete(c);
    FAIL() << "expected degenerate sample";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateSample);
  }
}

TEST(GsDiff, ZeroFlowGivesScaledIdentity) {
  std::vector<Correspondence> c;
  for (int i = 0; i < 6; ++i) c.push_back({Pixel(100 * i, 37 * i * i % 700), Flow::Zero()});
  const Matrix3 H = SolveGsDiff(c);
  for (const auto& x : c) EXPECT_LT(oracle::Flow(H, x.p1).norm(), 1e-10);
  EXPECT_LT(oracle::Flow(H, Pixel(640, 360)).norm(), 1e-10);
}

TEST(GsDiff, NoiseFreeFlowsReproduced) {
  std::mt19937_64 rng(2);
  const Matrix3 H = oracle::RandomDiffH(rng);
  for (int n : {4, 30}) {
    const auto c = oracle::RsPairs(H, 0.0, 0.0, 720.0, 1280.0, n, rng);
    const Matrix3 E = SolveGsDiff(c);
    const RsDiffModel m{E, 0.0, {0.0, 720.0}};
    EXPECT_LT(MaxFlowError(m, c), 1e-8);
    EXPECT_LT(MaxFlowError(m, oracle::RsPairs(H, 0.0, 0.0, 720.0, 1280.0, 20, rng)), 1e-8);
  }
}

TEST(GsDiff, FourPointResidualInNormalizedFrame) {
  std::mt19937_64 rng(3);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = oracle::RsPairs(H, 0.0, 0.0, 720.0, 1280.0, 4, rng);
  const NormalizedSet ns = HartleyNormalize(c);
  const Matrix3 En = ns.transform.NormalizeDiff(SolveGsDiff(c));
  double r = 0.0;
  for (const auto& x : ns.corrs) r += (oracle::Flow(En, x.p1) - x.u).squaredNorm();
  EXPECT_LT(std::sqrt(r), 1e-10);
}

TEST(RsConstVel, GammaZeroMatchesGsDiff) {
  std::mt19937_64 rng(4);
  const auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.0, 0.0, 720.0, 1280.0, 12, rng);
  const RsDiffModel m = SolveRsConstVel(c, {0.0, 720.0});
  EXPECT_EQ(m.k, 0.0);
  const Matrix3 G = SolveGsDiff(c);
  for (const auto& x : c) {
    EXPECT_LT((oracle::Flow(m.H, x.p1) - oracle::Flow(G, x.p1)).norm(), 1e-12);
  }
}

TEST(RsConstVel, ExactOnConstantVelocityData) {
  std::mt19937_64 rng(5);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = oracle::RsPairs(H, 0.0, 1.0, 720.0, 1280.0, 20, rng);
  EXPECT_LT(MaxFlowError(SolveRsConstVel(c, kRs), c), 1e-8);
}

TEST(RsConstVel, BiasedOnAcceleratedData) {
  std::mt19937_64 rng(6);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = oracle::RsPairs(H, 1.0, 1.0, 720.0, 1280.0, 20, rng);
  const double cv = MaxFlowError(SolveRsConstVel(c, kRs), c);
  const std::vector<Correspondence> five(c.begin(), c.begin() + 5);
  const RsDiffModel best = invariance::NearestK(SolveRsConstAcc5pt(five, kRs), 1.0);
  const double ca = MaxFlowError(best, c);
  EXPECT_GT(cv, 1e-4);
  EXPECT_GT(cv, ca);
}

TEST(RsConstAcc5pt, RecoversKAndFlows) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> K(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Matrix3 H = oracle::RandomDiffH(rng);
    const double k = K(rng);
    const auto c = oracle::RsPairs(H, k, 1.0, 720.0, 1280.0, 5, rng);
    const SolverOutput out = SolveRsConstAcc5pt(c, kRs);
    ASSERT_FALSE(out.models.empty());
    const RsDiffModel m = invariance::NearestK(out, k);
    EXPECT_NEAR(m.k, k, 1e-6);
    EXPECT_LT(MaxFlowError(m, oracle::RsPairs(H, k, 1.0, 720.0, 1280.0, 20, rng)), 1e-6);
    ASSERT_EQ(out.diagnostics.algebraic_residuals.size(), out.models.size());
    // the true candidate solves the whole system
    double best = INFINITY;
    for (size_t j = 0; j < out.models.size(); ++j) {
      if (std::abs(out.models[j].k - k) <= 1e-6) best = std::min(best, out.diagnostics.algebraic_residuals[j]);
    }
    EXPECT_LT(best, 1e-8);
  }
}

TEST(RsConstAcc5pt, ZeroAcceleration) {
  std::mt19937_64 rng(8);
  const auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.0, 1.0, 720.0, 1280.0, 5, rng);
  EXPECT_LT(std::abs(invariance::NearestK(SolveRsConstAcc5pt(c, kRs), 0.0).k), 1e-6);
}

TEST(RsConstAcc5pt, GammaZeroIsUnobservable) {
  std::mt19937_64 rng(9);
  const auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.0, 0.0, 720.0, 1280.0, 5, rng);
  try {
    SolveRsConstAcc5pt(c, {0.0, 720.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnobservableAcceleration);
  }
}

TEST(RsConstAcc5pt, PolynomialMatchesDirectDeterminant) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> K(-1.9, 10.0);
  for (int i = 0; i < 50; ++i) {
    const auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.5, 1.0, 720.0, 1280.0, 5, rng);
    const internal::RsPencil pencil = internal::BuildRsPencil(c, kRs);
    const Polynomial p = internal::PencilDeterminantPolynomial(pencil, 0, KRange{});
    double scale = 0.0;
    for (int j = 0; j < 20; ++j) scale = std::max(scale, std::abs(internal::PencilSubDeterminant(pencil, 0, K(rng))));
    for (int j = 0; j < 20; ++j) {
      const double k = K(rng);
      const double direct = internal::PencilSubDeterminant(pencil, 0, k);
      EXPECT_LE(std::abs(p.Evaluate(k) - direct), 1e-8 * std::max(scale, 1e-300));
    }
  }
}

TEST(RsWeighted, UniformWeightsMatchUnweightedFit) {
  std::mt19937_64 rng(11);
  const Matrix3 H = oracle::RandomDiffH(rng);
  auto c = oracle::RsPairs(H, 0.0, 1.0, 720.0, 1280.0, 30, rng);
  std::normal_distribution<double> N(0, 0.5);
  for (auto& x : c) x.u += Flow(N(rng), N(rng));
  const std::vector<double> ones(c.size(), 1.0), threes(c.size(), 3.0);
  const RsDiffModel a{SolveRsWeighted(c, ones, 0.0, kRs), 0.0, kRs};
  const RsDiffModel b = SolveRsConstVel(c, kRs);
  const RsDiffModel d{SolveRsWeighted(c, threes, 0.0, kRs), 0.0, kRs};
  for (const auto& x : c) {
    EXPECT_LT((invariance::Predict(a, x) - invariance::Predict(b, x)).norm(), 1e-9);
    EXPECT_LT((invariance::Predict(a, x) - invariance::Predict(d, x)).norm(), 1e-9);
  }
}

TEST(RsWeighted, ConcentratedWeightReproducesPoint) {
  std::mt19937_64 rng(12);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = oracle::RsPairs(H, 0.4, 1.0, 720.0, 1280.0, 25, rng);
  std::vector<double> w(c.size(), 1e-6);
  w[3] = 1.0;
  const RsDiffModel m{SolveRsWeighted(c, w, 0.4, kRs), 0.4, kRs};
  EXPECT_LT((invariance::Predict(m, c[3]) - c[3].u).norm(), 1e-8);
}

TEST(RsWeighted, GammaZeroMatchesGsWeighted) {
  std::mt19937_64 rng(13);
  auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.0, 0.0, 720.0, 1280.0, 25, rng);
  std::normal_distribution<double> N(0, 0.5);
  std::uniform_real_distribution<double> W(0.01, 1.0);
  std::vector<double> w;
  for (auto& x : c) {
    x.u += Flow(N(rng), N(rng));
    w.push_back(W(rng));
  }
  const Normalization norm = ComputeNormalization(c);
  const Matrix3 a = SolveRsWeighted(c, w, 1.7, {0.0, 720.0}, norm);
  const Matrix3 b = SolveGsDiffWeighted(c, w, norm);
  for (const auto& x : c) EXPECT_LT((oracle::Flow(a, x.p1) - oracle::Flow(b, x.p1)).norm(), 1e-9);
}

TEST(RsConstAccLs, OverdeterminedNoiseFree) {
  std::mt19937_64 rng(14);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = oracle::RsPairs(H, -0.6, 1.0, 720.0, 1280.0, 40, rng);
  const RsDiffModel m = SolveRsConstAccLs(c, kRs);
  EXPECT_NEAR(m.k, -0.6, 1e-6);
  EXPECT_LT(MaxFlowError(m, c), 1e-8);
}

TEST(Invariance, GaugeSuite) {
  const auto r = invariance::GaugeSuite(20, 100);
  EXPECT_TRUE(r.pass) << r.first_failure << " worst " << r.worst;
}

TEST(Invariance, NormalizationSuite) {
  const auto r = invariance::NormalizationSuite(20, 200);
  EXPECT_TRUE(r.pass) << r.first_failure << " worst " << r.worst;
}

TEST(KRange, Validate) {
  EXPECT_NO_THROW((KRange{-1.0, 1.0}.Validate()));
  EXPECT_THROW((KRange{1.0, -1.0}.Validate()), Error);
  EXPECT_THROW((KRange{-2.5, 1.0}.Validate()), Error);
}

}  // namespace
}  // namespace rsstitch
