#include <algorithm>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "rsstitch/robust.h"
#include "testing/oracles.h"

namespace rsstitch {
namespace {

const RsParams kRs{1.0, 720.0};

TEST(Residual, GsDiscreteExamples) {
  EXPECT_EQ(ResidualGsDisc(Matrix3::Identity(), {Pixel(5, 6), Flow::Zero()}), 0.0);
  EXPECT_DOUBLE_EQ(ResidualGsDisc(Matrix3::Identity(), {Pixel(5, 6), Flow(3, 4)}), 5.0);
  Matrix3 H = Matrix3::Identity();
  H(2, 0) = 1.0;
  H(2, 2) = -5.0;
  EXPECT_TRUE(std::isinf(ResidualGsDisc(H, {Pixel(5, 6), Flow::Zero()})));
}

TEST(Residual, GsDiscreteNoiseFreeOracle) {
  Matrix3 H;
  H << 0.98, 0.02, 11.0, -0.01, 1.01, -4.0, 2e-5, 1e-5, 1.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0, 700);
  for (int i = 0; i < 100; ++i) {
    const Pixel p(U(rng), U(rng));
    EXPECT_LE(ResidualGsDisc(H, Correspondence::FromPoints(p, oracle::Transfer(H, p))), 1e-9);
  }
}

TEST(Residual, RsExamples) {
  std::mt19937_64 rng(2);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const RsDiffModel m{H, 0.3, kRs};
  for (const auto& c : oracle::RsPairs(H, 0.3, 1.0, 720.0, 1280.0, 30, rng)) {
    EXPECT_LE(ResidualRs(m, c), 1e-9);
  }
  const RsDiffModel gs{H, 0.3, {0.0, 720.0}};
  const Correspondence c{Pixel(100, 200), Flow(3, -2)};
  EXPECT_NEAR(ResidualRs(gs, c), (c.u - oracle::Flow(H, c.p1)).norm(), 1e-12);
  EXPECT_EQ(ResidualRs(RsDiffModel{Matrix3::Zero(), 0.0, kRs}, {Pixel(3, 4), Flow::Zero()}), 0.0);
}

TEST(SolverIds, NamesAndParsing) {
  for (SolverId id : {SolverId::kGsDiscrete, SolverId::kGsDiscrete5, SolverId::kGsDiff,
                      SolverId::kRsConstVel, SolverId::kRsConstAcc}) {
    EXPECT_EQ(ParseSolverId(SolverName(id)), id);
  }
  EXPECT_EQ(ParseSolverId("rs_constacc"), SolverId::kRsConstAcc);
  EXPECT_FALSE(ParseSolverId("bogus"));
  EXPECT_EQ(MinimalSampleSize(SolverId::kGsDiscrete), 4);
  EXPECT_EQ(MinimalSampleSize(SolverId::kRsConstAcc), 5);
}

struct Mixture {
  std::vector<Correspondence> corrs;
  std::vector<size_t> truth;
};

Mixture MakeMixture(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> K(-1, 1), X(0, 1279), Y(0, 719);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto in = oracle::RsPairs(H, K(rng), 1.0, 720.0, 1280.0, 100, rng);
  Mixture m;
  for (int i = 0; i < 200; ++i) {
    if (i % 2 == 0) {
      m.truth.push_back(m.corrs.size());
      m.corrs.push_back(in[i / 2]);
    } else {
      m.corrs.push_back(Correspondence::FromPoints(Pixel(X(rng), Y(rng)), Pixel(X(rng), Y(rng))));
    }
  }
  return m;
}

TEST(Ransac, RsMixtureRecoversExactInlierSet) {
  int exact = 0;
  for (uint64_t s = 0; s < 10; ++s) {
    const Mixture m = MakeMixture(s);
    RansacParams p;
    p.threshold = 0.5;
    p.seed = s;
    p.rs = kRs;
    const RobustEstimate e = Ransac(m.corrs, SolverId::kRsConstAcc, p);
    exact += e.inliers == m.truth;
  }
  EXPECT_GE(exact, 9);
}

TEST(Ransac, GsExactDataAllInliers) {
  Matrix3 H;
  H << 1.01, 0.0, 20.0, 0.01, 0.99, -3.0, 1e-5, 0.0, 1.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 700);
  std::vector<Correspondence> c;
  for (int i = 0; i < 60; ++i) {
    const Pixel p(U(rng), U(rng));
    c.push_back(Correspondence::FromPoints(p, oracle::Transfer(H, p)));
  }
  RansacParams p;
  p.trials = 50;
  const RobustEstimate e = Ransac(c, SolverId::kGsDiscrete, p);
  EXPECT_EQ(e.inliers.size(), c.size());
}

void ExpectIdentical(const RobustEstimate& a, const RobustEstimate& b) {
  EXPECT_EQ(a.inliers, b.inliers);
  ASSERT_EQ(a.residuals.size(), b.residuals.size());
  for (size_t i = 0; i < a.residuals.size(); ++i) {
    EXPECT_EQ(std::memcmp(&a.residuals[i], &b.residuals[i], sizeof(double)), 0);
  }
  const auto& ma = std::get<RsDiffModel>(a.model);
  const auto& mb = std::get<RsDiffModel>(b.model);
  EXPECT_EQ(std::memcmp(ma.H.data(), mb.H.data(), 9 * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(&ma.k, &mb.k, sizeof(double)), 0);
  EXPECT_EQ(a.stats.best_trial, b.stats.best_trial);
}

TEST(Ransac, DeterministicAndThreadIndependent) {
  const Mixture m = MakeMixture(42);
  RansacParams p;
  p.threshold = 0.5;
  p.seed = 7;
  p.rs = kRs;
  p.trials = 300;
  p.threads = 1;
  const RobustEstimate a = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  const RobustEstimate b = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  p.threads = 4;
  const RobustEstimate c = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  ExpectIdentical(a, b);
  ExpectIdentical(a, c);
}

TEST(Ransac, ReportedInliersSatisfyPublicResidual) {
  const Mixture m = MakeMixture(5);
  RansacParams p;
  p.threshold = 0.5;
  p.rs = kRs;
  const RobustEstimate e = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  std::vector<size_t> expect;
  for (size_t i = 0; i < m.corrs.size(); ++i) {
    const double r = Residual(e.model, m.corrs[i]);
    EXPECT_EQ(r, e.residuals[i]);
    if (r <= p.threshold) expect.push_back(i);
  }
  EXPECT_EQ(e.inliers, expect);
}

TEST(Ransac, HoldoutExcludedFromConsensus) {
  const Mixture m = MakeMixture(6);
  RansacParams p;
  p.threshold = 0.5;
  p.rs = kRs;
  p.holdout = {0, 2, 4};
  const RobustEstimate e = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  for (size_t h : p.holdout) {
    EXPECT_FALSE(std::binary_search(e.inliers.begin(), e.inliers.end(), h));
    EXPECT_LE(e.residuals[h], 1e-6);  // still reported, and these were true inliers
  }
}

TEST(Ransac, RejectsTooFewPoints) {
  std::vector<Correspondence> c(3, {Pixel(1, 1), Flow::Zero()});
  EXPECT_THROW(Ransac(c, SolverId::kGsDiscrete, RansacParams{}), Error);
}

TEST(Ransac, SeedChangesSampling) {
  const Mixture m = MakeMixture(8);
  RansacParams p;
  p.threshold = 0.5;
  p.rs = kRs;
  p.trials = 200;
  p.seed = 1;
  const auto a = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  p.seed = 2;
  const auto b = Ransac(m.corrs, SolverId::kRsConstAcc, p);
  EXPECT_EQ(a.inliers, b.inliers);  // same answer ...
  EXPECT_NE(TrialSeed(1, 0), TrialSeed(2, 0));  // ... from different streams
}

TEST(FitLeastSquares, RsRefitOnInliers) {
  const Mixture m = MakeMixture(9);
  std::vector<Correspondence> in;
  for (size_t i : m.truth) in.push_back(m.corrs[i]);
  const Model fit = FitLeastSquares(SolverId::kRsConstAcc, in, kRs);
  for (const auto& c : in) EXPECT_LT(Residual(fit, c), 1e-6);
}

}  // namespace
}  // namespace rsstitch
