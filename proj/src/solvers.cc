#include "rsstitch/solvers.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>

namespace rsstitch {

void KRange::Validate() const {
  if (!(lo > -2.0) || !(hi > lo) || !std::isfinite(hi)) {
    std::ostringstream msg;
    msg << "k range [" << lo << ", " << hi << "] must be non-empty inside (-2, inf)";
    throw Error(ErrorCode::kParameterDomain, msg.str());
  }
}

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr int kMinWeightedPoints = 5;

// Observed second scanline of a correspondence.
double ObservedY2(const Correspondence& c) { return c.p1.y() + c.u.y(); }

void CanonicalizeSign(Matrix3* H) {
  Eigen::Index r = 0, c = 0;
  H->cwiseAbs().maxCoeff(&r, &c);
  if ((*H)(r, c) < 0.0) *H = -*H;
}

bool HasCollinearTriple(std::span<const Pixel> pts) {
  for (size_t i = 0; i < pts.size(); ++i) {
    for (size_t j = i + 1; j < pts.size(); ++j) {
      for (size_t l = j + 1; l < pts.size(); ++l) {
        const Pixel a = pts[j] - pts[i];
        const Pixel b = pts[l] - pts[i];
        const double cross = a.x() * b.y() - a.y() * b.x();
        const double scale = a.norm() * b.norm();
        if (std::abs(cross) <= 1e-9 * std::max(scale, 1e-300)) return true;
      }
    }
  }
  return false;
}

// Minimum-norm weighted least squares for the differential model
// sum |w_i (beta_i b_i h - u_i)|^2, in the normalized frame of `norm`.
// The smallest singular direction (eps * I) is always truncated.
Matrix3 SolveScaledDiff(std::span<const Correspondence> corrs,
                        std::span<const double> betas,
                        std::span<const double> weights,
                        const Normalization& norm,
                        double* conditioning = nullptr) {
  const Eigen::Index n = static_cast<Eigen::Index>(corrs.size());
  Eigen::MatrixXd A(std::max<Eigen::Index>(2 * n, 9), 9);
  Eigen::VectorXd rhs(A.rows());
  A.setZero();
  rhs.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Correspondence c = norm.Apply(corrs[i]);
    const double w = weights.empty() ? 1.0 : weights[i];
    A.block<2, 9>(2 * i, 0) = (w * betas[i]) * FlowCoeffRows(c.p1);
    rhs.segment<2>(2 * i) = w * c.u;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(7) <= kRankTolerance * s(0)) {
    throw Error(ErrorCode::kDegenerateSample,
                "differential system has rank < 8");
  }
  if (conditioning != nullptr) *conditioning = s(7) / s(0);
  HVector h = HVector::Zero();
  const Eigen::VectorXd Utb = svd.matrixU().transpose() * rhs;
  for (int i = 0; i < 8; ++i) {
    h += (Utb(i) / s(i)) * svd.matrixV().col(i);
  }
  return norm.DenormalizeDiff(UnvecRowMajor(h));
}

// Rows of b(p) without the H33 column.
Eigen::Matrix<double, 2, 8> GaugeFixedRows(const Pixel& p) {
  return FlowCoeffRows(p).leftCols<8>();
}

// beta(k) * (2 + k) / 2 = p + k q for one correspondence.
struct AffineBeta {
  double p = 1.0;
  double q = 0.0;
};

AffineBeta AffineBetaOf(const Correspondence& c, const RsParams& rs) {
  const double a1 = rs.gamma * c.p1.y() / rs.height;
  const double a2 = 1.0 + rs.gamma * ObservedY2(c) / rs.height;
  return {a2 - a1, 0.5 * (a2 * a2 - a1 * a1)};
}

// Precomputed normalized data for the 1-D profile over k.
class Profile {
 public:
  Profile(std::span<const Correspondence> corrs, const RsParams& rs) {
    norm_ = ComputeNormalization(corrs);
    const Eigen::Index n = static_cast<Eigen::Index>(corrs.size());
    B_.resize(2 * n, 8);
    U_.resize(2 * n);
    p_.resize(2 * n);
    q_.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Correspondence c = norm_.Apply(corrs[i]);
      B_.block<2, 8>(2 * i, 0) = GaugeFixedRows(c.p1);
      U_.segment<2>(2 * i) = c.u;
      const AffineBeta ab = AffineBetaOf(corrs[i], rs);
      p_.segment<2>(2 * i).setConstant(ab.p);
      q_.segment<2>(2 * i).setConstant(ab.q);
    }
  }

  Eigen::VectorXd Residual(double k) const {
    const Eigen::VectorXd scale = p_ + k * q_;
    const Eigen::MatrixXd D = scale.asDiagonal() * B_;
    const Eigen::VectorXd g = D.colPivHouseholderQr().solve(U_);
    return D * g - U_;
  }
  double Cost(double k) const { return Residual(k).squaredNorm(); }

  // Gauss-Newton on the projected residual; Brent alone stops at
  // sqrt(machine eps) in k because the cost is flat at its minimum.
  double Polish(double k, const KRange& range) const {
    Eigen::VectorXd r = Residual(k);
    for (int it = 0; it < 8; ++it) {
      const double dk = 1e-6 * (1.0 + std::abs(k));
      const Eigen::VectorXd J = (Residual(k + dk) - Residual(k - dk)) / (2.0 * dk);
      const double jj = J.squaredNorm();
      if (!(jj > 0.0)) break;
      const double next = k - J.dot(r) / jj;
      if (!range.Contains(next)) break;
      const Eigen::VectorXd rn = Residual(next);
      if (!(rn.squaredNorm() < r.squaredNorm())) break;
      const double step = std::abs(next - k);
      k = next;
      r = rn;
      if (step <= 1e-15 * (1.0 + std::abs(k))) break;
    }
    return k;
  }

 private:
  Normalization norm_;
  Eigen::MatrixXd B_;
  Eigen::VectorXd U_, p_, q_;
};

}  // namespace

Matrix3 SolveGsDiscrete(std::span<const Correspondence> corrs) {
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kDegenerateSample,
                "discrete homography needs at least 4 correspondences");
  }
  std::vector<Pixel> p1, p2;
  for (const Correspondence& c : corrs) {
    p1.push_back(c.p1);
    p2.push_back(c.p2());
  }
  if (corrs.size() == 4 && (HasCollinearTriple(p1) || HasCollinearTriple(p2))) {
    throw Error(ErrorCode::kDegenerateSample,
                "three of the four sample points are collinear");
  }
  const Normalization n1 = ComputeNormalization(p1);
  const Normalization n2 = ComputeNormalization(p2);
  const std::vector<double> uniform(corrs.size(), 1.0);
  return SolveGsDiscreteWeighted(corrs, uniform, n1, n2);
}

Matrix3 SolveGsDiscreteWeighted(std::span<const Correspondence> corrs,
                                std::span<const double> weights,
                                const Normalization& n1,
                                const Normalization& n2,
                                double* conditioning) {
  const Eigen::Index n = static_cast<Eigen::Index>(corrs.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pixel a = n1.Apply(corrs[i].p1);
    const Pixel b = n2.Apply(corrs[i].p2());
    const double w = weights[i];
    A.row(2 * i) << 0, 0, 0, -a.x(), -a.y(), -1, b.y() * a.x(), b.y() * a.y(),
        b.y();
    A.row(2 * i + 1) << a.x(), a.y(), 1, 0, 0, 0, -b.x() * a.x(),
        -b.x() * a.y(), -b.x();
    A.row(2 * i) *= w;
    A.row(2 * i + 1) *= w;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(7) <= kRankTolerance * s(0)) {
    throw Error(ErrorCode::kDegenerateSample,
                "DLT system has a null space of dimension > 1");
  }
  if (conditioning != nullptr) *conditioning = s(7) / s(0);
  const HVector h = svd.matrixV().col(8);
  Matrix3 H = n2.T.inverse() * UnvecRowMajor(h) * n1.T;
  H /= H.norm();
  CanonicalizeSign(&H);
  return H;
}

Matrix3 SolveGsDiff(std::span<const Correspondence> corrs) {
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kDegenerateSample,
                "differential homography needs at least 4 correspondences");
  }
  const Normalization norm = ComputeNormalization(corrs);
  const std::vector<double> ones(corrs.size(), 1.0);
  return SolveScaledDiff(corrs, ones, {}, norm);
}

RsDiffModel SolveRsConstVel(std::span<const Correspondence> corrs,
                            const RsParams& rs) {
  rs.Validate();
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kDegenerateSample,
                "constant-velocity solver needs at least 4 correspondences");
  }
  std::vector<double> betas;
  betas.reserve(corrs.size());
  for (const Correspondence& c : corrs) {
    betas.push_back(Beta(0.0, c.p1.y(), ObservedY2(c), rs));
  }
  const Normalization norm = ComputeNormalization(corrs);
  return {SolveScaledDiff(corrs, betas, {}, norm), 0.0, rs};
}

Matrix3 SolveRsWeighted(std::span<const Correspondence> corrs,
                        std::span<const double> weights, double k,
                        const RsParams& rs) {
  return SolveRsWeighted(corrs, weights, k, rs, ComputeNormalization(corrs));
}

Matrix3 SolveRsWeighted(std::span<const Correspondence> corrs,
                        std::span<const double> weights, double k,
                        const RsParams& rs, const Normalization& norm,
                        double* conditioning) {
  rs.Validate();
  if (weights.size() != corrs.size()) {
    throw Error(ErrorCode::kParameterDomain, "one weight per correspondence");
  }
  int positive = 0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kParameterDomain, "weights must be finite and >= 0");
    }
    if (w > 0.0) ++positive;
  }
  if (positive < kMinWeightedPoints) {
    throw Error(ErrorCode::kDegenerateSample,
                "weighted fit needs at least 5 positively weighted points");
  }
  std::vector<double> betas;
  betas.reserve(corrs.size());
  for (const Correspondence& c : corrs) {
    betas.push_back(Beta(k, c.p1.y(), ObservedY2(c), rs));
  }
  return SolveScaledDiff(corrs, betas, weights, norm, conditioning);
}

Matrix3 SolveGsDiffWeighted(std::span<const Correspondence> corrs,
                            std::span<const double> weights,
                            const Normalization& norm, double* conditioning) {
  if (weights.size() != corrs.size()) {
    throw Error(ErrorCode::kParameterDomain, "one weight per correspondence");
  }
  int positive = 0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kParameterDomain, "weights must be finite and >= 0");
    }
    if (w > 0.0) ++positive;
  }
  if (positive < 4) {
    throw Error(ErrorCode::kDegenerateSample,
                "weighted fit needs at least 4 positively weighted points");
  }
  const std::vector<double> ones(corrs.size(), 1.0);
  return SolveScaledDiff(corrs, ones, weights, norm, conditioning);
}

double RsProfileCost(std::span<const Correspondence> corrs, double k,
                     const RsParams& rs) {
  return Profile(corrs, rs).Cost(k);
}

RsDiffModel SolveRsConstAccLs(std::span<const Correspondence> corrs,
                              const RsParams& rs, const KRange& k_range,
                              std::optional<double> k_seed) {
  rs.Validate();
  k_range.Validate();
  if (rs.gamma == 0.0) {
    throw Error(ErrorCode::kUnobservableAcceleration,
                "gamma = 0: acceleration is unobservable");
  }
  if (corrs.size() < static_cast<size_t>(kMinWeightedPoints)) {
    throw Error(ErrorCode::kDegenerateSample,
                "constant-acceleration fit needs at least 5 correspondences");
  }
  const Profile profile(corrs, rs);
  constexpr int kGrid = 60;
  std::vector<double> grid;
  for (int i = 0; i <= kGrid; ++i) {
    grid.push_back(k_range.lo + (k_range.hi - k_range.lo) * i / kGrid);
  }
  if (k_seed && k_range.Contains(*k_seed)) grid.push_back(*k_seed);
  std::sort(grid.begin(), grid.end());
  size_t best = 0;
  double best_cost = profile.Cost(grid[0]);
  for (size_t i = 1; i < grid.size(); ++i) {
    const double cost = profile.Cost(grid[i]);
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  double k = grid[best];
  if (hi > lo) {
    boost::uintmax_t max_iter = 200;
    const auto [k_min, cost_min] = boost::math::tools::brent_find_minima(
        [&](double kk) { return profile.Cost(kk); }, lo, hi, 50, max_iter);
    if (cost_min <= best_cost) k = k_min;
  }
  k = profile.Polish(k, k_range);
  const std::vector<double> ones(corrs.size(), 1.0);
  return {SolveRsWeighted(corrs, ones, k, rs), k, rs};
}

namespace internal {

RsPencil BuildRsPencil(std::span<const Correspondence> corrs,
                       const RsParams& rs) {
  if (corrs.size() != 5) {
    throw Error(ErrorCode::kDegenerateSample,
                "5-point solver needs exactly 5 correspondences");
  }
  RsPencil pencil;
  pencil.norm = ComputeNormalization(corrs);
  pencil.C0.setZero();
  pencil.C1.setZero();
  Eigen::Matrix<double, 5, 8> cross;
  Eigen::Matrix<double, 5, 8> along;
  Eigen::Matrix<double, 5, 1> magnitude, p, q;
  double mean_flow = 0.0;
  for (int i = 0; i < 5; ++i) {
    mean_flow += pencil.norm.ApplyFlow(corrs[i].u).norm() / 5.0;
  }
  for (int i = 0; i < 5; ++i) {
    const Correspondence c = pencil.norm.Apply(corrs[i]);
    const AffineBeta ab = AffineBetaOf(corrs[i], rs);
    const Eigen::Matrix<double, 2, 8> b = GaugeFixedRows(c.p1);
    pencil.C0.block<2, 8>(2 * i, 0) = ab.p * b;
    pencil.C1.block<2, 8>(2 * i, 0) = ab.q * b;
    pencil.C0.block<2, 1>(2 * i, 8) = -c.u;
    const double norm_u = c.u.norm();
    if (!(norm_u > 1e-12 * std::max(mean_flow, 1e-300))) {
      throw Error(ErrorCode::kDegenerateSample,
                  "zero flow in the 5-point sample");
    }
    const Flow dir = c.u / norm_u;
    cross.row(i) = dir.y() * b.row(0) - dir.x() * b.row(1);
    along.row(i) = dir.x() * b.row(0) + dir.y() * b.row(1);
    magnitude(i) = norm_u;
    p(i) = ab.p;
    q(i) = ab.q;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 5, 8>> svd(cross, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(4) <= kRankTolerance * s(0)) {
    throw Error(ErrorCode::kDegenerateSample,
                "flow-direction constraints of the sample are rank deficient");
  }
  const Eigen::Matrix<double, 8, 3> null_basis = svd.matrixV().rightCols<3>();
  const Eigen::Matrix<double, 5, 3> projected = along * null_basis;
  for (int i = 0; i < 5; ++i) {
    pencil.R0.block<1, 3>(i, 0) = p(i) * projected.row(i);
    pencil.R1.block<1, 3>(i, 0) = q(i) * projected.row(i);
    pencil.R0(i, 3) = -magnitude(i);
    pencil.R1(i, 3) = 0.0;
  }
  return pencil;
}

double PencilSubDeterminant(const RsPencil& pencil, int dropped_row,
                            double k) {
  const Eigen::Matrix<double, 5, 4> M = pencil.ReducedAt(k);
  Eigen::Matrix4d S;
  for (int r = 0, out = 0; r < 5; ++r) {
    if (r == dropped_row) continue;
    S.row(out++) = M.row(r);
  }
  return S.determinant();
}

Polynomial PencilDeterminantPolynomial(const RsPencil& pencil, int dropped_row,
                                       const KRange& k_range) {
  return Polynomial::Interpolate(
      [&](double k) { return PencilSubDeterminant(pencil, dropped_row, k); }, 3,
      k_range.lo, k_range.hi);
}

}  // namespace internal

SolverOutput SolveRsConstAcc5pt(std::span<const Correspondence> corrs,
                                const RsParams& rs, const KRange& k_range) {
  rs.Validate();
  k_range.Validate();
  if (rs.gamma == 0.0) {
    throw Error(ErrorCode::kUnobservableAcceleration,
                "gamma = 0: C(k) does not depend on k; use a GS solver");
  }
  const internal::RsPencil pencil = internal::BuildRsPencil(corrs, rs);

  SolverOutput out;
  double y_min = corrs[0].p1.y(), y_max = corrs[0].p1.y();
  for (const Correspondence& c : corrs) {
    y_min = std::min(y_min, c.p1.y());
    y_max = std::max(y_max, c.p1.y());
  }
  out.diagnostics.scanline_spread = (y_max - y_min) / rs.height;

  // Nine equations determine (h, k); each choice of the dropped magnitude
  // row gives one cubic and the roots of all five are pooled.
  std::vector<double> roots;
  bool any_nonzero = false;
  for (int dropped = 0; dropped < 5; ++dropped) {
    const Polynomial poly =
        internal::PencilDeterminantPolynomial(pencil, dropped, k_range);
    if (poly.IsZero()) continue;
    any_nonzero = true;
    out.diagnostics.poly_degree =
        std::max(out.diagnostics.poly_degree, poly.Degree());
    auto det = [&](double k) { return internal::PencilSubDeterminant(pencil, dropped, k); };
    for (double k : poly.RealRoots()) {
      ++out.diagnostics.real_roots;
      // secant polish against the directly evaluated minor
      double a = k, b = k + 1e-7 * (1.0 + std::abs(k));
      double fa = det(a), fb = det(b);
      for (int it = 0; it < 20 && fb != fa; ++it) {
        const double c = b - fb * (b - a) / (fb - fa);
        if (!std::isfinite(c) || std::abs(c - k) > 1e-3 * (1.0 + std::abs(k))) break;
        a = b;
        fa = fb;
        b = c;
        fb = det(b);
        if (std::abs(b - a) <= 1e-15 * (1.0 + std::abs(b))) break;
      }
      if (std::abs(fb) <= std::abs(det(k))) k = b;
      if (k_range.Contains(k)) roots.push_back(k);
    }
  }
  if (!any_nonzero) {
    throw Error(ErrorCode::kDegenerateSample,
                "determinant vanishes for every k (degenerate sample)");
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) {
                            return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a));
                          }),
              roots.end());
  out.diagnostics.admissible_roots = static_cast<int>(roots.size());

  for (double k : roots) {
    const Eigen::Matrix<double, 10, 9> M = pencil.At(k);
    Eigen::JacobiSVD<Eigen::Matrix<double, 10, 9>> svd(M, Eigen::ComputeFullV);
    const Eigen::Matrix<double, 9, 1> v = svd.matrixV().col(8);
    if (std::abs(v(8)) < 1e-10) continue;
    const Eigen::Matrix<double, 9, 1> h_hat = v / v(8);
    HVector h = HVector::Zero();
    h.head<8>() = h_hat.head<8>() * (0.5 * (2.0 + k));
    RsDiffModel model{pencil.norm.DenormalizeDiff(UnvecRowMajor(h)), k, rs};
    if (!model.H.allFinite()) continue;
    out.models.push_back(model);
    out.diagnostics.algebraic_residuals.push_back((M * h_hat).norm());
  }
  if (out.models.empty()) {
    throw Error(ErrorCode::kNoSolution,
                "no admissible real root of det C(k) in the k range");
  }
  return out;
}

}  // namespace rsstitch
