#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsstitch/core.h"
#include "rsstitch/raster.h"
#include "rsstitch/render.h"
#include "rsstitch/robust.h"
#include "rsstitch/solvers.h"

namespace rsstitch {

struct CameraConfig {
  int width = 1280;
  int height = 720;
  double hfov_deg = 60.0;
  RsParams rs{1.0, 720.0};

  double Focal() const;
  // Principal point at the image center ((w - 1) / 2, (h - 1) / 2).
  Matrix3 K() const;
  void Validate() const;
  static CameraConfig WithGamma(double gamma);
};

// Rodrigues: exp([theta]x).
Matrix3 ExpSo3(const Vector3& theta);

enum class GenMode {
  // Both frames from the scanline-pose projection.
  kExact,
  // Frame 1 from the scanline-pose projection, frame 2 from the stitching map
  // of the ground-truth differential model (consistent to rounding).
  kFirstOrder,
};

struct SyntheticScene {
  MotionSpec motion;
  Plane plane;
  std::vector<Vector3> points;
  CameraConfig camera;
  uint64_t seed = 0;
};

struct Projection {
  Pixel p = Pixel::Zero();
  bool multiple_roots = false;
};

// Scanline pose at y: orientation exp([b omega]x), center b v, b = beta(y) of
// the frame; the camera sees R^T (X - c). Solves for the scanline that images
// X by bracketing on [0, h] and TOMS 748. nullopt if X is behind the camera
// or no root exists; with several roots the one nearest the projection from
// the frame's first-scanline pose is used and flagged.
std::optional<Projection> ProjectRs(const Vector3& X, const MotionSpec& motion,
                                    Frame frame, const CameraConfig& camera);

// Eq. defining the scanline: pi_y(K R^T (X - c(y))) - y.
double ScanlineEquationResidual(const Vector3& X, const MotionSpec& motion, Frame frame,
                                const CameraConfig& camera, double y);

// Random directions and plane for one configuration, independent of the
// motion magnitudes so sweeps share configurations.
struct SceneDraw {
  Vector3 normal = Vector3::UnitZ();
  Vector3 omega_dir = Vector3::UnitX();
  Vector3 v_dir = Vector3::UnitX();
  uint64_t point_seed = 0;
};

SceneDraw DrawScene(uint64_t seed, uint64_t config_index, const CameraConfig& camera);

struct SceneParams {
  double omega_deg = 3.0;
  double v = 0.03;
  double k = 0.0;
  int num_points = 100;
  GenMode mode = GenMode::kExact;
};

// Plane normal within 60 deg of the optical axis, d so that the mean depth
// over the field of view is 1, points visible in both frames.
SyntheticScene MakeScene(const SceneDraw& draw, const SceneParams& params,
                         const CameraConfig& camera);
SyntheticScene RandomScene(uint64_t seed, const SceneParams& params,
                           const CameraConfig& camera = {});

// -K([omega]x + v n^T / d) K^-1
Matrix3 GroundTruthH(const SyntheticScene& scene);
RsDiffModel GroundTruthModel(const SyntheticScene& scene);

struct GeneratedPair {
  std::vector<Correspondence> noisy;
  std::vector<Correspondence> clean;
  RsDiffModel truth;
  int multiple_root_points = 0;
  // Scene points not visible in both frames under this generator.
  int dropped_points = 0;
};

// Gaussian noise (sigma_g per coordinate) on both points of every pair.
// Throws kDegenerateConfiguration when fewer than 5 points remain.
GeneratedPair GenCorrespondences(const SyntheticScene& scene, double sigma_g,
                                 uint64_t noise_seed, GenMode mode = GenMode::kExact);

nlohmann::json SceneToJson(const SyntheticScene& scene);
SyntheticScene SceneFromJson(const nlohmann::json& j);

// ---- sweeps ----

enum class SweepParam { kGamma, kOmega, kV, kK };
std::string SweepParamName(SweepParam p);
std::optional<SweepParam> ParseSweepParam(const std::string& name);

struct SweepSolver {
  std::string name;
  SolverId id = SolverId::kGsDiscrete;
  // RANSAC trials relative to the spec's count (GS-MoreTrials: 1.25).
  double trial_factor = 1.0;
};
// GS-disc, GS-diff, RS-ConstVel, RS-ConstAcc, GS-5point, GS-MoreTrials.
std::optional<SweepSolver> ParseSweepSolver(const std::string& name);

enum class Estimation { kAuto, kLeastSquares, kRansac };

struct SweepSpec {
  SweepParam param = SweepParam::kGamma;
  std::vector<double> values;
  double gamma = 1.0;
  double omega_deg = 3.0;
  double v = 0.03;
  double k = 0.0;
  double sigma_g = 0.0;
  int configs = 100;
  int points = 100;
  std::vector<SweepSolver> solvers;
  uint64_t seed = 1;
  GenMode generator = GenMode::kExact;
  // kAuto: least squares on all points when sigma_g = 0, RANSAC + inlier
  // refit otherwise.
  Estimation estimation = Estimation::kAuto;
  int ransac_trials = 1000;
  // <= 0: max(1, 3 sigma_g).
  double threshold = 0.0;
  KRange k_range;
  int width = 1280;
  int height = 720;
  double hfov_deg = 60.0;

  void Validate() const;
  Estimation ResolvedEstimation() const;
  double ResolvedThreshold() const;
};

struct SweepRow {
  SweepParam param = SweepParam::kGamma;
  double value = 0.0;
  std::string solver;
  double sigma_g = 0.0;
  double mean_err = 0.0;
  double std_err = 0.0;
  int n_configs = 0;
  int failures = 0;
};

// Mean reprojection error of an estimated model on clean pairs: transfer
// error for discrete homographies, stitching-map error otherwise. nullopt if
// any point is unmapped.
std::optional<double> MeanReprojectionError(const Model& model,
                                            std::span<const Correspondence> clean);

// Fits one solver to one generated pair per the spec's estimation mode.
Model EstimateForSweep(const SweepSpec& spec, const SweepSolver& solver,
                       std::span<const Correspondence> corrs, const RsParams& rs,
                       uint64_t seed);

std::vector<SweepRow> RunSweep(const SweepSpec& spec);
std::string SweepCsv(std::span<const SweepRow> rows);
nlohmann::json SweepMeta(const SweepSpec& spec);

// ---- CDF / held-out ----

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

// Sorted values with fractions (i + 1) / n. Throws kParameterDomain if empty.
std::vector<CdfPoint> EvalCdf(std::span<const double> medians);
// Fraction of values <= x.
double CdfAt(std::span<const CdfPoint> cdf, double x);
double MedianOf(std::span<const double> values);

struct HeldOutResult {
  double held_in_median = 0.0;
  double held_out_median = 0.0;
  std::vector<size_t> test_indices;
  RobustEstimate estimate;
};

// Reserves n_test random correspondences (excluded from RANSAC) and reports
// median residuals on both sets.
HeldOutResult EvaluateHeldOut(std::span<const Correspondence> corrs, SolverId id,
                              RansacParams params, size_t n_test, uint64_t seed);

// ---- stitching metric ----

// sqrt(mean (1 - NCC)^2) over 3x3 windows fully inside `overlap` (or inside
// both masks when overlap is empty). Windows constant in both images count as
// NCC = 1; constant in exactly one are skipped. Throws kUndefinedMetric when
// no window qualifies.
double RmseNcc(const Raster& a, const Raster& b, std::span<const uint8_t> overlap = {});

// ---- procedural imagery ----

struct TextureSpec {
  // Checker period in plane units (scene depth is ~1).
  double period = 0.06;
  int waves = 12;
  uint64_t seed = 7;
};

// Renders the scene plane as seen by the RS camera in the given frame, each
// row from its own scanline pose; ss x ss supersampling per pixel.
Raster RenderPlaneRs(const SyntheticScene& scene, Frame frame,
                     const TextureSpec& texture = {}, int ss = 2);

}  // namespace rsstitch
