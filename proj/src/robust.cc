#include "rsstitch/robust.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

namespace rsstitch {

int MinimalSampleSize(SolverId id) {
  switch (id) {
    case SolverId::kGsDiscrete:
    case SolverId::kGsDiff:
    case SolverId::kRsConstVel:
      return 4;
    case SolverId::kGsDiscrete5:
    case SolverId::kRsConstAcc:
      return 5;
  }
  return 4;
}

std::string SolverName(SolverId id) {
  switch (id) {
    case SolverId::kGsDiscrete:
      return "GS-disc";
    case SolverId::kGsDiscrete5:
      return "GS-5point";
    case SolverId::kGsDiff:
      return "GS-diff";
    case SolverId::kRsConstVel:
      return "RS-ConstVel";
    case SolverId::kRsConstAcc:
      return "RS-ConstAcc";
  }
  return "unknown";
}

std::optional<SolverId> ParseSolverId(const std::string& name) {
  std::string key;
  for (char ch : name) {
    if (ch != '-' && ch != '_') {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (key == "gsdisc") return SolverId::kGsDiscrete;
  if (key == "gs5point") return SolverId::kGsDiscrete5;
  if (key == "gsdiff") return SolverId::kGsDiff;
  if (key == "rsconstvel") return SolverId::kRsConstVel;
  if (key == "rsconstacc") return SolverId::kRsConstAcc;
  return std::nullopt;
}

void RansacParams::Validate(SolverId id) const {
  if (trials < 1) {
    throw Error(ErrorCode::kParameterDomain, "RANSAC needs at least one trial");
  }
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kParameterDomain, "inlier threshold must be > 0");
  }
  if (sample_size != 0 && sample_size < MinimalSampleSize(id)) {
    throw Error(ErrorCode::kParameterDomain,
                "sample size below the solver minimum");
  }
  if (id == SolverId::kRsConstAcc && sample_size != 0 && sample_size != 5) {
    throw Error(ErrorCode::kParameterDomain,
                "the 5-point solver takes exactly 5 samples");
  }
  rs.Validate();
  k_range.Validate();
  if (id == SolverId::kRsConstAcc && rs.gamma == 0.0) {
    throw Error(ErrorCode::kUnobservableAcceleration,
                "gamma = 0: k is unobservable, use a GS solver");
  }
}

double ResidualGsDisc(const Matrix3& H, const Correspondence& c) {
  const Vector3 x = H * Vector3(c.p1.x(), c.p1.y(), 1.0);
  const double scale = H.cwiseAbs().maxCoeff();
  if (!(std::abs(x.z()) > 1e-14 * std::max(scale, 1e-300)) || !x.allFinite()) {
    return std::numeric_limits<double>::infinity();
  }
  return (c.p2() - x.head<2>() / x.z()).norm();
}

double ResidualRs(const RsDiffModel& model, const Correspondence& c) {
  return (c.u - FlowRs(model, c.p1, c.p1.y() + c.u.y())).norm();
}

double Residual(const Model& model, const Correspondence& c) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DiscreteHomography>) {
          return ResidualGsDisc(m.H, c);
        } else {
          return ResidualRs(m, c);
        }
      },
      model);
}

std::vector<Model> SolveSample(SolverId id,
                               std::span<const Correspondence> sample,
                               const RansacParams& params) {
  std::vector<Model> out;
  switch (id) {
    case SolverId::kGsDiscrete:
    case SolverId::kGsDiscrete5:
      out.push_back(DiscreteHomography{SolveGsDiscrete(sample)});
      break;
    case SolverId::kGsDiff:
      out.push_back(RsDiffModel{SolveGsDiff(sample), 0.0,
                                RsParams{0.0, params.rs.height}});
      break;
    case SolverId::kRsConstVel:
      out.push_back(SolveRsConstVel(sample, params.rs));
      break;
    case SolverId::kRsConstAcc: {
      const SolverOutput solved =
          SolveRsConstAcc5pt(sample, params.rs, params.k_range);
      for (const RsDiffModel& m : solved.models) out.push_back(m);
      break;
    }
  }
  return out;
}

Model FitLeastSquares(SolverId id, std::span<const Correspondence> corrs,
                      const RsParams& rs, const KRange& k_range,
                      std::optional<double> k_seed) {
  switch (id) {
    case SolverId::kGsDiscrete:
    case SolverId::kGsDiscrete5:
      return DiscreteHomography{SolveGsDiscrete(corrs)};
    case SolverId::kGsDiff:
      return RsDiffModel{SolveGsDiff(corrs), 0.0, RsParams{0.0, rs.height}};
    case SolverId::kRsConstVel:
      return SolveRsConstVel(corrs, rs);
    case SolverId::kRsConstAcc:
      return SolveRsConstAccLs(corrs, rs, k_range, k_seed);
  }
  throw Error(ErrorCode::kParameterDomain, "unknown solver");
}

uint64_t TrialSeed(uint64_t seed, uint64_t trial) {
  // splitmix64 finalizer over a seed/trial mix.
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int DefaultThreadCount() {
  if (const char* env = std::getenv("RSSTITCH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

namespace {

bool Admissible(const Model& model, const KRange& k_range) {
  return std::visit(
      [&](const auto& m) -> bool {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DiscreteHomography>) {
          return m.H.allFinite() && std::abs(m.H.determinant()) > 1e-300;
        } else {
          return m.H.allFinite() && std::isfinite(m.k) && m.k > -2.0 &&
                 (m.rs.gamma == 0.0 || k_range.Contains(m.k));
        }
      },
      model);
}

double Median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), values.begin() + mid));
  }
  return m;
}

struct Scored {
  int inliers = -1;
  double inlier_sum = std::numeric_limits<double>::infinity();
  double median = std::numeric_limits<double>::infinity();
  int trial = std::numeric_limits<int>::max();
  int candidate = 0;
  std::optional<Model> model;

  // Strict weak order: more inliers, then smaller summed inlier residual,
  // then earlier.
  bool BetterThan(const Scored& o) const {
    if (inliers != o.inliers) return inliers > o.inliers;
    if (inlier_sum != o.inlier_sum) return inlier_sum < o.inlier_sum;
    if (trial != o.trial) return trial < o.trial;
    return candidate < o.candidate;
  }
};

struct WorkerResult {
  Scored best;
  TrialStats stats;
};

WorkerResult RunTrials(std::span<const Correspondence> corrs,
                       const std::vector<size_t>& pool, SolverId id,
                       const RansacParams& params, int sample_size,
                       int first_trial, int last_trial) {
  WorkerResult result;
  std::vector<size_t> picks(sample_size);
  std::vector<Correspondence> sample(sample_size);
  std::vector<double> residuals(pool.size());
  for (int trial = first_trial; trial < last_trial; ++trial) {
    ++result.stats.trials;
    std::mt19937_64 rng(TrialSeed(params.seed, static_cast<uint64_t>(trial)));
    std::uniform_int_distribution<size_t> dist(0, pool.size() - 1);
    for (int s = 0; s < sample_size; ++s) {
      size_t pick;
      do {
        pick = dist(rng);
      } while (std::find(picks.begin(), picks.begin() + s, pick) !=
               picks.begin() + s);
      picks[s] = pick;
      sample[s] = corrs[pool[pick]];
    }
    std::vector<Model> candidates;
    try {
      candidates = SolveSample(id, sample, params);
    } catch (const Error&) {
      ++result.stats.solver_failures;
      continue;
    }
    for (size_t ci = 0; ci < candidates.size(); ++ci) {
      ++result.stats.candidates;
      const Model& model = candidates[ci];
      if (!Admissible(model, params.k_range)) continue;
      ++result.stats.admissible;
      int count = 0;
      double sum = 0.0;
      for (size_t i = 0; i < pool.size(); ++i) {
        residuals[i] = Residual(model, corrs[pool[i]]);
        if (residuals[i] <= params.threshold) {
          ++count;
          sum += residuals[i];
        }
      }
      if (count < result.best.inliers) continue;
      Scored scored;
      scored.inliers = count;
      scored.inlier_sum = sum;
      scored.median = Median(residuals);
      scored.trial = trial;
      scored.candidate = static_cast<int>(ci);
      if (scored.BetterThan(result.best)) {
        scored.model = model;
        result.best = std::move(scored);
      }
    }
  }
  return result;
}

}  // namespace

RobustEstimate Ransac(std::span<const Correspondence> corrs, SolverId id,
                      const RansacParams& params) {
  params.Validate(id);
  const int sample_size =
      params.sample_size == 0 ? MinimalSampleSize(id) : params.sample_size;
  std::vector<bool> held(corrs.size(), false);
  for (size_t i : params.holdout) {
    if (i >= corrs.size()) {
      throw Error(ErrorCode::kParameterDomain, "held-out index out of range");
    }
    held[i] = true;
  }
  std::vector<size_t> pool;
  for (size_t i = 0; i < corrs.size(); ++i) {
    if (!held[i]) pool.push_back(i);
  }
  if (pool.size() < static_cast<size_t>(sample_size)) {
    throw Error(ErrorCode::kEstimationFailure,
                "fewer correspondences than the sample size");
  }

  const int threads = std::clamp(
      params.threads > 0 ? params.threads : DefaultThreadCount(), 1,
      params.trials);
  std::vector<WorkerResult> results(threads);
  if (threads == 1) {
    results[0] = RunTrials(corrs, pool, id, params, sample_size, 0, params.trials);
  } else {
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) {
      const int first = params.trials * t / threads;
      const int last = params.trials * (t + 1) / threads;
      workers.emplace_back([&, t, first, last] {
        results[t] = RunTrials(corrs, pool, id, params, sample_size, first, last);
      });
    }
    for (std::thread& w : workers) w.join();
  }

  RobustEstimate estimate;
  Scored best;
  for (WorkerResult& r : results) {
    estimate.stats.trials += r.stats.trials;
    estimate.stats.solver_failures += r.stats.solver_failures;
    estimate.stats.candidates += r.stats.candidates;
    estimate.stats.admissible += r.stats.admissible;
    if (r.best.model && r.best.BetterThan(best)) best = std::move(r.best);
  }
  if (!best.model) {
    throw Error(ErrorCode::kEstimationFailure,
                "no RANSAC trial produced an admissible model");
  }
  estimate.model = *best.model;
  estimate.stats.best_trial = best.trial;
  estimate.median_residual = best.median;
  estimate.residuals.resize(corrs.size());
  for (size_t i = 0; i < corrs.size(); ++i) {
    estimate.residuals[i] = Residual(estimate.model, corrs[i]);
    if (!held[i] && estimate.residuals[i] <= params.threshold) {
      estimate.inliers.push_back(i);
    }
  }
  return estimate;
}

}  // namespace rsstitch
