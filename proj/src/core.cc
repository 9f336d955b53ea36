#include "rsstitch/core.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rsstitch {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParameterDomain:
      return "parameter-domain";
    case ErrorCode::kDegenerateConfiguration:
      return "degenerate-configuration";
    case ErrorCode::kDegenerateSample:
      return "degenerate-sample";
    case ErrorCode::kUnobservableAcceleration:
      return "unobservable-acceleration";
    case ErrorCode::kNoSolution:
      return "no-solution";
    case ErrorCode::kEstimationFailure:
      return "estimation-failure";
    case ErrorCode::kUndefinedMetric:
      return "undefined-metric";
    case ErrorCode::kParse:
      return "parse";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kSchema:
      return "schema";
  }
  return "unknown";
}

HVector VecRowMajor(const Matrix3& H) {
  HVector h;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      h(3 * r + c) = H(r, c);
    }
  }
  return h;
}

Matrix3 UnvecRowMajor(const HVector& h) {
  Matrix3 H;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      H(r, c) = h(3 * r + c);
    }
  }
  return H;
}

void RsParams::Validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kParameterDomain, "gamma must lie in [0, 1]");
  }
  if (!(height >= 2.0) || !std::isfinite(height)) {
    throw Error(ErrorCode::kParameterDomain, "image height must be >= 2");
  }
}

void RsDiffModel::Validate() const {
  rs.Validate();
  if (!(k > -2.0) || !std::isfinite(k)) {
    throw Error(ErrorCode::kParameterDomain, "acceleration k must be > -2");
  }
  if (!H.allFinite()) {
    throw Error(ErrorCode::kParameterDomain, "non-finite homography");
  }
}

namespace {

double AccelerationNorm(double k) {
  if (!(k > -2.0) || !std::isfinite(k)) {
    throw Error(ErrorCode::kParameterDomain, "acceleration k must be > -2");
  }
  return 2.0 / (2.0 + k);
}

}  // namespace

double Beta1(double k, double y1, const RsParams& rs) {
  const double c = AccelerationNorm(k);
  const double a = rs.gamma * y1 / rs.height;
  return (a + 0.5 * k * a * a) * c;
}

double Beta2(double k, double y2, const RsParams& rs) {
  const double c = AccelerationNorm(k);
  const double a = 1.0 + rs.gamma * y2 / rs.height;
  return (a + 0.5 * k * a * a) * c;
}

double Beta(double k, double y1, double y2, const RsParams& rs) {
  return Beta2(k, y2, rs) - Beta1(k, y1, rs);
}

Flow FlowGs(const Matrix3& H, const Pixel& p) {
  const Vector3 x(p.x(), p.y(), 1.0);
  const Vector3 Hx = H * x;
  return {Hx(0) - p.x() * Hx(2), Hx(1) - p.y() * Hx(2)};
}

Eigen::Matrix2d FlowGsJacobian(const Matrix3& H, const Pixel& p) {
  const double x = p.x();
  const double y = p.y();
  const double w = H(2, 0) * x + H(2, 1) * y + H(2, 2);
  Eigen::Matrix2d J;
  J(0, 0) = H(0, 0) - w - x * H(2, 0);
  J(0, 1) = H(0, 1) - x * H(2, 1);
  J(1, 0) = H(1, 0) - y * H(2, 0);
  J(1, 1) = H(1, 1) - w - y * H(2, 1);
  return J;
}

Flow FlowRs(const RsDiffModel& model, const Pixel& p1, double y2) {
  return Beta(model.k, p1.y(), y2, model.rs) * FlowGs(model.H, p1);
}

FlowRows FlowCoeffRows(const Pixel& p) {
  const double x = p.x();
  const double y = p.y();
  FlowRows b;
  b << x, y, 1, 0, 0, 0, -x * x, -x * y, -x,  //
      0, 0, 0, x, y, 1, -x * y, -y * y, -y;
  return b;
}

Matrix3 Normalization::DenormalizeDiff(const Matrix3& H_normalized) const {
  return T.inverse() * H_normalized * T;
}

Matrix3 Normalization::NormalizeDiff(const Matrix3& H) const {
  return T * H * T.inverse();
}

Normalization ComputeNormalization(std::span<const Pixel> points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "normalization needs at least two points");
  }
  Pixel centroid = Pixel::Zero();
  for (const Pixel& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const Pixel& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  const double extent = std::max(std::abs(centroid.x()), std::abs(centroid.y()));
  if (!(mean_dist > 1e-12 * std::max(1.0, extent))) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "all points coincide; normalization undefined");
  }
  Normalization n;
  n.scale = std::sqrt(2.0) / mean_dist;
  n.centroid = centroid;
  n.T << n.scale, 0, -n.scale * centroid.x(),  //
      0, n.scale, -n.scale * centroid.y(),     //
      0, 0, 1;
  return n;
}

Normalization ComputeNormalization(std::span<const Correspondence> corrs) {
  std::vector<Pixel> points;
  points.reserve(corrs.size());
  for (const Correspondence& c : corrs) points.push_back(c.p1);
  return ComputeNormalization(points);
}

NormalizedSet HartleyNormalize(std::span<const Correspondence> corrs) {
  NormalizedSet out;
  out.transform = ComputeNormalization(corrs);
  out.corrs.reserve(corrs.size());
  for (const Correspondence& c : corrs) {
    out.corrs.push_back(out.transform.Apply(c));
  }
  return out;
}

void ValidateCorrespondences(std::span<const Correspondence> corrs,
                             double flow_cap) {
  for (size_t i = 0; i < corrs.size(); ++i) {
    const Correspondence& c = corrs[i];
    if (!c.p1.allFinite() || !c.u.allFinite()) {
      std::ostringstream msg;
      msg << "correspondence " << i << " has non-finite coordinates";
      throw Error(ErrorCode::kParameterDomain, msg.str());
    }
    if (flow_cap > 0.0 && c.u.norm() > flow_cap) {
      std::ostringstream msg;
      msg << "correspondence " << i << " flow magnitude " << c.u.norm()
          << " exceeds cap " << flow_cap;
      throw Error(ErrorCode::kParameterDomain, msg.str());
    }
  }
}

double DefaultFlowCap(double width, double height) {
  return std::hypot(width, height);
}

Matrix3 Skew(const Vector3& w) {
  Matrix3 S;
  S << 0, -w.z(), w.y(),  //
      w.z(), 0, -w.x(),   //
      -w.y(), w.x(), 0;
  return S;
}

}  // namespace rsstitch
