#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rsstitch/core.h"
#include "rsstitch/polynomial.h"

namespace rsstitch {

// Admissible interval for the acceleration parameter.
struct KRange {
  double lo = -1.9;
  double hi = 10.0;

  bool Contains(double k) const { return k >= lo && k <= hi; }
  void Validate() const;
};

struct SolverDiagnostics {
  int poly_degree = -1;
  int real_roots = 0;
  int admissible_roots = 0;
  // (max y - min y) / h over the sample; small values weaken the
  // observability of k.
  double scanline_spread = 0.0;
  // Residual of each candidate on the full 10-equation system in normalized
  // coordinates, parallel to SolverOutput::models. Near zero for the true
  // root of a noise-free sample; roots pooled from single minors that do not
  // solve the whole system show up here with large values.
  std::vector<double> algebraic_residuals;
};

struct SolverOutput {
  std::vector<RsDiffModel> models;
  SolverDiagnostics diagnostics;
};

// DLT: unit-Frobenius-norm H with x2 ~ H x1, total least squares for more
// than four points. Sign fixed so that the largest-magnitude entry is
// positive. Throws kDegenerateSample on rank-deficient systems.
Matrix3 SolveGsDiscrete(std::span<const Correspondence> corrs);

// Weighted DLT (one SVD of the weighted stack) in the frames given by the
// two normalizations. Used by the APAP field.
Matrix3 SolveGsDiscreteWeighted(std::span<const Correspondence> corrs,
                                std::span<const double> weights,
                                const Normalization& n1,
                                const Normalization& n2,
                                double* conditioning = nullptr);

// Least-squares differential homography (B h = U). The eps gauge is fixed by
// the minimum-norm solution in Hartley-normalized coordinates.
Matrix3 SolveGsDiff(std::span<const Correspondence> corrs);

// Weighted differential fit (GS APAP in differential form).
Matrix3 SolveGsDiffWeighted(std::span<const Correspondence> corrs,
                            std::span<const double> weights,
                            const Normalization& norm,
                            double* conditioning = nullptr);

// Constant-velocity RS model (k = 0) by linear least squares. With
// gamma = 0 the result is identical to SolveGsDiff.
RsDiffModel SolveRsConstVel(std::span<const Correspondence> corrs,
                            const RsParams& rs);

// Constant-acceleration 5-point solver (hidden variable in k). Every
// candidate has k inside k_range; candidate selection is left to the caller.
// Throws kUnobservableAcceleration for gamma = 0, kDegenerateSample for
// degenerate samples and kNoSolution when no admissible root exists.
SolverOutput SolveRsConstAcc5pt(std::span<const Correspondence> corrs,
                                const RsParams& rs, const KRange& k_range = {});

// Closed-form weighted least squares for the RS field at fixed k:
// min sum |w_i (beta_i(k) b_i h - u_i)|^2. Needs at least five positive
// weights. `conditioning` receives s8 / s1 of the system. The overload
// without a normalization computes it from corrs.
Matrix3 SolveRsWeighted(std::span<const Correspondence> corrs,
                        std::span<const double> weights, double k,
                        const RsParams& rs);
Matrix3 SolveRsWeighted(std::span<const Correspondence> corrs,
                        std::span<const double> weights, double k,
                        const RsParams& rs, const Normalization& norm,
                        double* conditioning = nullptr);

// Non-minimal constant-acceleration fit: k minimizes the least-squares flow
// residual (variable projection over k_range, optionally seeded), then H is
// the least-squares solution at that k.
RsDiffModel SolveRsConstAccLs(std::span<const Correspondence> corrs,
                              const RsParams& rs, const KRange& k_range = {},
                              std::optional<double> k_seed = std::nullopt);

// Sum of squared flow residuals of the best H at fixed k (normalized frame).
double RsProfileCost(std::span<const Correspondence> corrs, double k,
                     const RsParams& rs);

namespace internal {

// C'(k) = C0 + k C1 for five correspondences in normalized coordinates,
// with the common factor 2 / (2 + k) removed and the H33 column dropped.
// Columns 0..7 multiply the scaled entries of H (row-major without H33);
// column 8 multiplies the homogeneous 1.
//
// Each point's two rows are recombined into a k-free cross row
// (u_y r_x - u_x r_y, after removing its factor beta_i(k)) and a magnitude
// row along u. The five cross rows confine h to a 3-dim subspace N; in that
// basis the magnitude rows form the 5x4 pencil R(k) = R0 + k R1, whose 4x4
// minors are cubic in k and vanish at the true acceleration.
struct RsPencil {
  Eigen::Matrix<double, 10, 9> C0;
  Eigen::Matrix<double, 10, 9> C1;
  Eigen::Matrix<double, 5, 4> R0;
  Eigen::Matrix<double, 5, 4> R1;
  Normalization norm;

  Eigen::Matrix<double, 10, 9> At(double k) const { return C0 + k * C1; }
  Eigen::Matrix<double, 5, 4> ReducedAt(double k) const { return R0 + k * R1; }
};

RsPencil BuildRsPencil(std::span<const Correspondence> corrs,
                       const RsParams& rs);

// Determinant of the reduced pencil with magnitude row `dropped_row` (0..4)
// removed.
double PencilSubDeterminant(const RsPencil& pencil, int dropped_row, double k);

// Cubic (at most) determinant polynomial by Chebyshev interpolation.
Polynomial PencilDeterminantPolynomial(const RsPencil& pencil, int dropped_row,
                                       const KRange& k_range);

}  // namespace internal

}  // namespace rsstitch
