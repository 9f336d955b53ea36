#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rsstitch/solvers.h"
#include "rsstitch/warpfield.h"
#include "testing/invariance.h"
#include "testing/oracles.h"

namespace rsstitch {
namespace {

const RsParams kRs{1.0, 720.0};

TEST(Weight, Examples) {
  WeightParams wp;
  wp.sigma = 100.0;
  wp.tau = 0.01;
  EXPECT_EQ(Weight(Pixel(3, 4), Pixel(3, 4), wp), 1.0);
  EXPECT_EQ(Weight(Pixel(0, 0), Pixel(1e6, 0), wp), 0.01);
  EXPECT_DOUBLE_EQ(Weight(Pixel(0, 0), Pixel(60, 80), wp), std::exp(-1.0));
  wp.tau = 0.5;
  EXPECT_EQ(Weight(Pixel(0, 0), Pixel(60, 80), wp), 0.5);
}

TEST(WeightParams, DefaultsAndValidation) {
  const WeightParams wp = WeightParams::ForImage(1280, 720);
  EXPECT_NEAR(wp.sigma, 0.1 * std::hypot(1280.0, 720.0), 1e-12);
  EXPECT_EQ(wp.tau, 0.0025);
  EXPECT_EQ(wp.cell, 40.0);
  WeightParams bad = wp;
  bad.tau = 0.0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = wp;
  bad.sigma = -1.0;
  EXPECT_THROW(bad.Validate(), Error);
}

TEST(Grid, GeometryAndLookup) {
  const GridGeometry g = GridGeometry::Make(100, 50, 40.0);
  EXPECT_EQ(g.cols, 3);
  EXPECT_EQ(g.rows, 2);
  EXPECT_EQ(g.Center(0, 0), Pixel(19.5, 19.5));
  EXPECT_EQ(g.IndexAt(Pixel(0, 0)), 0);
  EXPECT_EQ(g.IndexAt(Pixel(39.4, 0)), 0);
  EXPECT_EQ(g.IndexAt(Pixel(39.6, 0)), 1);
  EXPECT_EQ(g.IndexAt(Pixel(99, 49)), 5);
  EXPECT_EQ(g.IndexAt(Pixel(-500, 900)), 3);
}

std::vector<Correspondence> Noisy(std::vector<Correspondence> c, double s, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, s);
  for (auto& x : c) x.u += Flow(N(rng), N(rng));
  return c;
}

double CellVsGlobal(const WarpField& f, const std::vector<Correspondence>& probe) {
  double worst = 0.0;
  const Model g = f.GlobalModel();
  for (int i = 0; i < f.grid.size(); ++i) {
    worst = std::max(worst, invariance::RelDiff(f.CellModel(i), g, probe));
  }
  return worst;
}

TEST(ApapField, TauOneEqualsGlobalFit) {
  std::mt19937_64 rng(1);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = Noisy(oracle::RsPairs(H, 0.5, 1.0, 720.0, 1280.0, 60, rng), 0.7, 2);
  WeightParams wp = WeightParams::ForImage(1280, 720);
  wp.tau = 1.0;
  wp.cell = 160.0;
  for (FieldMode mode : {FieldMode::kGsDiscrete, FieldMode::kGsDifferential, FieldMode::kRsDifferential}) {
    const RsParams rs = mode == FieldMode::kGsDifferential ? RsParams{0.0, 720.0} : kRs;
    const WarpField f = BuildApapField(c, mode, 0.5, rs, wp, 1280, 720);
    for (const Matrix3& M : f.cells) EXPECT_EQ(M, f.global) << FieldModeName(mode);
    EXPECT_TRUE(f.fallback_cells.empty());
  }
  // global equals the uniform-weight solve
  const WarpField f = BuildApapField(c, FieldMode::kRsDifferential, 0.5, kRs, wp, 1280, 720);
  const std::vector<double> ones(c.size(), 1.0);
  const RsDiffModel direct{SolveRsWeighted(c, ones, 0.5, kRs), 0.5, kRs};
  EXPECT_LT(invariance::RelDiff(f.GlobalModel(), direct, c), 1e-9);
}

TEST(ApapField, PlanarNoiseFreeFieldIsConstant) {
  std::mt19937_64 rng(3);
  const Matrix3 H = oracle::RandomDiffH(rng);
  const auto c = oracle::RsPairs(H, -0.4, 1.0, 720.0, 1280.0, 80, rng);
  WeightParams wp = WeightParams::ForImage(1280, 720);
  wp.cell = 80.0;
  const WarpField f = BuildApapField(c, FieldMode::kRsDifferential, -0.4, kRs, wp, 1280, 720);
  for (int i = 0; i < f.grid.size(); ++i) {
    for (const auto& x : c) {
      EXPECT_LT((invariance::Predict(f.CellModel(i), x) - invariance::Predict(f.GlobalModel(), x)).norm(), 1e-6);
    }
  }
}

TEST(ApapField, GammaZeroRsFieldEqualsGsDifferentialField) {
  std::mt19937_64 rng(4);
  const auto c = Noisy(oracle::RsPairs(oracle::RandomDiffH(rng), 0.0, 0.0, 720.0, 1280.0, 70, rng), 0.5, 5);
  WeightParams wp = WeightParams::ForImage(1280, 720);
  wp.cell = 80.0;
  const RsParams gs{0.0, 720.0};
  const WarpField rs = BuildApapField(c, FieldMode::kRsDifferential, 0.9, gs, wp, 1280, 720);
  const WarpField gd = BuildApapField(c, FieldMode::kGsDifferential, 0.0, gs, wp, 1280, 720);
  ASSERT_EQ(rs.cells.size(), gd.cells.size());
  for (size_t i = 0; i < rs.cells.size(); ++i) {
    for (const auto& x : c) {
      EXPECT_LT((oracle::Flow(rs.cells[i], x.p1) - oracle::Flow(gd.cells[i], x.p1)).norm(), 1e-9);
    }
  }
}

// Plane-induced differential homography for a given motion (calibrated
// intrinsics of the default camera).
Matrix3 PlaneH(const Vector3& w, const Vector3& v, const Vector3& n, double d) {
  const double f = 1108.5;
  Matrix3 K;
  K << f, 0, 639.5, 0, f, 359.5, 0, 0, 1;
  return -K * (Skew(w) + v * n.transpose() / d) * K.inverse();
}

TEST(ApapField, TwoPlaneSceneFavoursLocalModels) {
  const Vector3 w(0.01, -0.02, 0.005), v(0.03, 0.01, -0.01);
  const Matrix3 Ha = PlaneH(w, v, Vector3(0, 0, 1), 1.0);
  const Matrix3 Hb = PlaneH(w, v, Vector3(0.6, 0, 0.8).normalized(), 0.5);
  std::mt19937_64 rng(6);
  std::vector<Correspondence> all, minority;
  for (const auto& x : oracle::RsPairs(Ha, 0.2, 1.0, 720.0, 1280.0, 300, rng)) {
    if (x.p1.x() < 900) all.push_back(x);
  }
  for (const auto& x : oracle::RsPairs(Hb, 0.2, 1.0, 720.0, 1280.0, 200, rng)) {
    if (x.p1.x() >= 900) {
      all.push_back(x);
      minority.push_back(x);
    }
  }
  ASSERT_GT(minority.size(), 20u);
  const WarpField f = BuildApapField(all, FieldMode::kRsDifferential, 0.2, kRs, WeightParams::ForImage(1280, 720), 1280, 720);
  double local = 0.0, single = 0.0;
  for (const auto& x : minority) {
    local += (invariance::Predict(f.ModelAt(x.p1), x) - x.u).norm();
    single += (invariance::Predict(f.GlobalModel(), x) - x.u).norm();
  }
  EXPECT_LT(local, single);
  EXPECT_LT(local, 0.5 * single);
}

TEST(ApapField, FarCorrespondenceHasFloorInfluence) {
  std::mt19937_64 rng(7);
  const Matrix3 H = oracle::RandomDiffH(rng);
  auto c = Noisy(oracle::RsPairs(H, 0.0, 1.0, 720.0, 1280.0, 60, rng), 0.3, 8);
  c.push_back({Pixel(1270, 710), oracle::Flow(H, Pixel(1270, 710))});
  WeightParams wp = WeightParams::ForImage(1280, 720);
  const WarpField a = BuildApapField(c, FieldMode::kRsDifferential, 0.0, kRs, wp, 1280, 720);
  const double delta = 5.0;
  c.back().u += Flow(delta, 0.0);
  const WarpField b = BuildApapField(c, FieldMode::kRsDifferential, 0.0, kRs, wp, 1280, 720);
  const Pixel q = a.grid.Center(0, 0);
  ASSERT_EQ(Weight(q, Pixel(1270, 710), wp), wp.tau);
  const Correspondence probe{q, Flow::Zero()};
  const double change = (invariance::Predict(a.CellModel(0), probe) - invariance::Predict(b.CellModel(0), probe)).norm();
  EXPECT_LE(change, 10.0 * wp.tau * delta);
}

TEST(ApapField, ModeMismatchAndDegenerateGlobal) {
  std::vector<Correspondence> c(10, {Pixel(5, 5), Flow(1, 1)});
  EXPECT_THROW(BuildApapField(c, FieldMode::kRsDifferential, 0.0, kRs, WeightParams{}, 100, 100), Error);
}

TEST(ApapField, JsonRoundTrip) {
  std::mt19937_64 rng(9);
  const auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.3, 1.0, 720.0, 1280.0, 40, rng);
  WeightParams wp = WeightParams::ForImage(1280, 720);
  wp.cell = 160.0;
  const WarpField f = BuildApapField(c, FieldMode::kRsDifferential, 0.3, kRs, wp, 1280, 720);
  const WarpField g = FieldFromJson(FieldToJson(f));
  EXPECT_EQ(g.mode, f.mode);
  EXPECT_EQ(g.grid.cols, f.grid.cols);
  EXPECT_EQ(g.k, f.k);
  EXPECT_EQ(g.rs.gamma, f.rs.gamma);
  ASSERT_EQ(g.cells.size(), f.cells.size());
  for (size_t i = 0; i < f.cells.size(); ++i) EXPECT_EQ(g.cells[i], f.cells[i]);
  EXPECT_EQ(g.inlier_set_id, InlierSetId(c));
  nlohmann::json bad = FieldToJson(f);
  bad.erase("cells");
  try {
    FieldFromJson(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
}

TEST(ApapField, ConditioningReported) {
  std::mt19937_64 rng(10);
  const auto c = oracle::RsPairs(oracle::RandomDiffH(rng), 0.3, 1.0, 720.0, 1280.0, 40, rng);
  WeightParams wp = WeightParams::ForImage(1280, 720);
  wp.cell = 320.0;
  const WarpField f = BuildApapField(c, FieldMode::kGsDiscrete, 0.0, kRs, wp, 1280, 720);
  ASSERT_EQ(f.conditioning.size(), f.cells.size());
  for (double s : f.conditioning) {
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

}  // namespace
}  // namespace rsstitch
