#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsstitch/synthbench.h"

namespace rsstitch {

// Pass/fail rule evaluated on sweep rows (mean errors).
//   le:        mean(a) <= mean(b) at every value >= min_value
//   ratio:     mean(solver @ num) / mean(solver @ den) >= min
//   flat:      max / min of mean(solver) over the sweep <= max
//   monotone:  mean(solver) non-decreasing in the sweep value
//   finite:    no failures for solver at values >= min_value
struct BenchCheck {
  std::string kind;
  std::string name;
  std::string a, b, solver;
  double min_value = -std::numeric_limits<double>::infinity();
  double num = 0.0, den = 0.0;
  double min = 0.0, max = 0.0;
};

struct BenchSpec {
  SweepSpec sweep;
  std::vector<BenchCheck> checks;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// TOML: a [sweep] table with the SweepSpec fields (param, values, gamma,
// omega_deg, v, k, sigma_g, configs, points, solvers, seed, generator,
// estimation, ransac_trials, threshold, k_range, width, height, hfov_deg) and
// optional [[check]] tables. Schema problems throw kSchema.
BenchSpec ParseBenchSpec(const std::string& toml_text, const std::string& source = "<spec>");
BenchSpec ReadBenchSpec(const std::string& path);

std::vector<CheckResult> EvaluateChecks(const std::vector<BenchCheck>& checks,
                                        const std::vector<SweepRow>& rows);

nlohmann::json CheckResultsJson(const std::vector<CheckResult>& results);

}  // namespace rsstitch
