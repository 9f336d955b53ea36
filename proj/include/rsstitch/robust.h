#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rsstitch/core.h"
#include "rsstitch/solvers.h"

namespace rsstitch {

// Projective map x2 ~ H x1 between two global-shutter views.
struct DiscreteHomography {
  Matrix3 H = Matrix3::Identity();
};

// GS differential models are RsDiffModel with gamma = 0 and k = 0.
using Model = std::variant<DiscreteHomography, RsDiffModel>;

enum class SolverId {
  kGsDiscrete,   // 'GS-disc': 4-point DLT
  kGsDiscrete5,  // 'GS-5point': 5-point least-squares DLT
  kGsDiff,       // 'GS-diff': 4-point differential
  kRsConstVel,   // 'RS-ConstVel': linear 4-point, k = 0
  kRsConstAcc,   // 'RS-ConstAcc': 5-point hidden-variable
};

int MinimalSampleSize(SolverId id);
std::string SolverName(SolverId id);
// Accepts the names above case-insensitively, plus short CLI aliases
// (gs-disc, gs-5point, gs-diff, rs-constvel, rs-constacc).
std::optional<SolverId> ParseSolverId(const std::string& name);

struct RansacParams {
  int trials = 1000;
  // Inlier cutoff in pixels.
  double threshold = 1.0;
  // 0 selects the solver minimum.
  int sample_size = 0;
  uint64_t seed = 0;
  KRange k_range;
  RsParams rs;
  // Excluded from sampling and from consensus; residuals are still reported.
  std::vector<size_t> holdout;
  // 0 reads RSSTITCH_THREADS (default 1). Results do not depend on it.
  int threads = 0;

  void Validate(SolverId id) const;
};

struct TrialStats {
  int trials = 0;
  int solver_failures = 0;
  int candidates = 0;
  int admissible = 0;
  int best_trial = -1;
};

struct RobustEstimate {
  Model model;
  // Sorted indices of scored correspondences with residual <= threshold.
  std::vector<size_t> inliers;
  // Residual of every input correspondence under `model`.
  std::vector<double> residuals;
  double median_residual = 0.0;
  TrialStats stats;
};

// |p2 - dehomogenize(H p1)|; +inf when p1 maps to infinity.
double ResidualGsDisc(const Matrix3& H, const Correspondence& c);
// |u - FlowRs(model, p1, observed y2)|.
double ResidualRs(const RsDiffModel& model, const Correspondence& c);
double Residual(const Model& model, const Correspondence& c);

// Candidate models of one solver on one sample (several for RS-ConstAcc).
std::vector<Model> SolveSample(SolverId id, std::span<const Correspondence> sample,
                               const RansacParams& params);

// Least-squares fit of the solver's model family on all given points.
// RS-ConstAcc estimates k by variable projection, seeded with k_seed.
Model FitLeastSquares(SolverId id, std::span<const Correspondence> corrs,
                      const RsParams& rs, const KRange& k_range = {},
                      std::optional<double> k_seed = std::nullopt);

// Max-consensus RANSAC; deterministic given params.seed. Throws
// kEstimationFailure when no trial yields an admissible model.
RobustEstimate Ransac(std::span<const Correspondence> corrs, SolverId id,
                      const RansacParams& params);

// Per-trial random stream derived from (seed, trial) only.
uint64_t TrialSeed(uint64_t seed, uint64_t trial);

int DefaultThreadCount();

}  // namespace rsstitch
