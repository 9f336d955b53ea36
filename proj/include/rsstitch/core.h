#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "rsstitch/error.h"

namespace rsstitch {

// Image coordinates: origin at the top-left pixel center, y grows downwards
// and equals the scanline index (scanline 0 is read out first).
using Pixel = Eigen::Vector2d;
using Flow = Eigen::Vector2d;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

// Row-major vectorization of a 3x3 matrix: h = [H11 H12 H13 H21 ... H33].
using HVector = Eigen::Matrix<double, 9, 1>;
using FlowRows = Eigen::Matrix<double, 2, 9>;

HVector VecRowMajor(const Matrix3& H);
Matrix3 UnvecRowMajor(const HVector& h);

struct Correspondence {
  Pixel p1 = Pixel::Zero();
  // Frame-2 position minus frame-1 position, in pixels.
  Flow u = Flow::Zero();

  Pixel p2() const { return p1 + u; }

  static Correspondence FromPoints(const Pixel& p1, const Pixel& p2) {
    return {p1, p2 - p1};
  }
};

// Rolling-shutter readout description of one camera.
struct RsParams {
  // Readout time over inter-frame time, in [0, 1]. Zero is a global shutter.
  double gamma = 1.0;
  // Total number of scanlines.
  double height = 720.0;

  void Validate() const;
};

// Differential homography plus constant-acceleration parameter. H is only
// defined up to an additive eps * I; any representative predicts the same
// flow.
struct RsDiffModel {
  Matrix3 H = Matrix3::Zero();
  double k = 0.0;
  RsParams rs;

  void Validate() const;
};

struct MotionSpec {
  // Rotational velocity (radians per inter-frame unit time).
  Vector3 omega = Vector3::Zero();
  // Translational velocity in units of the average scene depth.
  Vector3 v = Vector3::Zero();
  double k = 0.0;
};

struct Plane {
  Vector3 n = Vector3::UnitZ();
  double d = 1.0;
};

// Scanline pose interpolation under constant acceleration. Both reject
// k <= -2, where the 2 / (2 + k) normalization is undefined. y is not range
// checked: forward maps evaluate candidate scanlines slightly outside [0, h].
double Beta1(double k, double y1, const RsParams& rs);
double Beta2(double k, double y2, const RsParams& rs);
// Beta2(k, y2) - Beta1(k, y1): scale of the inter-scanline motion.
double Beta(double k, double y1, double y2, const RsParams& rs);

// First two components of (I - x e3^T) H x for homogeneous x = [p; 1].
Flow FlowGs(const Matrix3& H, const Pixel& p);

// Jacobian of FlowGs with respect to p.
Eigen::Matrix2d FlowGsJacobian(const Matrix3& H, const Pixel& p);

// Beta(k, p1.y, y2) * FlowGs(H, p1).
Flow FlowRs(const RsDiffModel& model, const Pixel& p1, double y2);

// Rows b with b * VecRowMajor(H) == FlowGs(H, p).
FlowRows FlowCoeffRows(const Pixel& p);

// Similarity normalization of a correspondence set: x' = s * (x - c) and
// u' = s * u. Differential homographies transform by conjugation,
// H' = T H T^-1, which maps eps * I to itself.
struct Normalization {
  Matrix3 T = Matrix3::Identity();
  double scale = 1.0;
  Pixel centroid = Pixel::Zero();

  Pixel Apply(const Pixel& p) const { return scale * (p - centroid); }
  Flow ApplyFlow(const Flow& u) const { return scale * u; }
  Correspondence Apply(const Correspondence& c) const {
    return {Apply(c.p1), ApplyFlow(c.u)};
  }
  // H' (normalized frame) -> H (pixel frame) for differential homographies.
  Matrix3 DenormalizeDiff(const Matrix3& H_normalized) const;
  Matrix3 NormalizeDiff(const Matrix3& H) const;
};

// Hartley normalization computed from the given points: zero centroid and
// mean distance sqrt(2). Throws kDegenerateConfiguration when all points
// coincide.
Normalization ComputeNormalization(std::span<const Pixel> points);
Normalization ComputeNormalization(std::span<const Correspondence> corrs);

struct NormalizedSet {
  Normalization transform;
  std::vector<Correspondence> corrs;
};

NormalizedSet HartleyNormalize(std::span<const Correspondence> corrs);

// Ingestion check: finite entries and |u| below the cap. A non-positive cap
// disables the magnitude test. Throws kParameterDomain naming the index.
void ValidateCorrespondences(std::span<const Correspondence> corrs,
                             double flow_cap);

// Default flow cap: the image diagonal.
double DefaultFlowCap(double width, double height);

Matrix3 Skew(const Vector3& w);

}  // namespace rsstitch
