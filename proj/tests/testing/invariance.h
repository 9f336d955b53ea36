// Gauge and normalization invariance suites, shared by unit and acceptance
// tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rsstitch/robust.h"
#include "rsstitch/solvers.h"
#include "testing/oracles.h"

namespace invariance {

using namespace rsstitch;

struct SuiteResult {
  bool pass = true;
  double worst = 0.0;  // worst relative discrepancy seen
  int instances = 0;
  std::string first_failure;
};

// Flow predicted by any model at p1 (RS models use the forward map's y2 from
// the observed correspondence, as the residuals do).
inline Flow Predict(const Model& m, const Correspondence& c) {
  if (const auto* d = std::get_if<DiscreteHomography>(&m)) {
    return oracle::Transfer(d->H, c.p1) - c.p1;
  }
  const auto& r = std::get<RsDiffModel>(m);
  const double b = oracle::B2(r.k, c.p2().y(), r.rs.gamma, r.rs.height) -
                   oracle::B1(r.k, c.p1.y(), r.rs.gamma, r.rs.height);
  return b * oracle::Flow(r.H, c.p1);
}

struct Instance {
  Matrix3 H;
  double k;
  std::vector<Correspondence> sample;  // minimal or small set
  std::vector<Correspondence> many;    // overdetermined set
  std::vector<Correspondence> probe;   // evaluation points
};

inline Instance MakeInstance(std::mt19937_64& rng, double gamma, double eps = 0.0) {
  std::uniform_real_distribution<double> K(-1.0, 1.0);
  Instance in;
  in.H = oracle::RandomDiffH(rng);
  in.k = K(rng);
  const Matrix3 Hg = in.H + eps * Matrix3::Identity();
  in.sample = oracle::RsPairs(Hg, in.k, gamma, 720.0, 1280.0, 5, rng);
  in.many = oracle::RsPairs(Hg, in.k, gamma, 720.0, 1280.0, 30, rng);
  in.probe = oracle::RsPairs(Hg, in.k, gamma, 720.0, 1280.0, 20, rng);
  return in;
}

// Largest |a - b| / max(|b|, floor) over probes.
inline double RelDiff(const Model& a, const Model& b, const std::vector<Correspondence>& probe,
                      double scale_b = 1.0) {
  double worst = 0.0;
  for (const Correspondence& c : probe) {
    const Flow fb = scale_b * Predict(b, c);
    const double den = std::max(fb.norm(), 1.0);
    worst = std::max(worst, (Predict(a, c) - fb).norm() / den);
  }
  return worst;
}

inline void Note(SuiteResult& r, double v, double tol, const std::string& what) {
  r.worst = std::max(r.worst, v);
  if (!(v <= tol)) {
    if (r.pass) r.first_failure = what + " discrepancy " + std::to_string(v);
    r.pass = false;
  }
}

// Nearest-k candidate of an RS minimal solve.
inline RsDiffModel NearestK(const SolverOutput& out, double k) {
  return *std::min_element(out.models.begin(), out.models.end(),
                           [&](const RsDiffModel& a, const RsDiffModel& b) {
                             return std::abs(a.k - k) < std::abs(b.k - k);
                           });
}

// Adds eps * I to the ground truth before generating flows: generated flows
// and every solver's predicted flows must not change.
inline SuiteResult GaugeSuite(int n, uint64_t seed, double tol = 1e-9) {
  SuiteResult r;
  std::mt19937_64 rng(seed);
  const RsParams rs{1.0, 720.0};
  for (int i = 0; i < n; ++i) {
    const uint64_t s = rng();
    std::mt19937_64 base_rng(s);
    const Instance base = MakeInstance(base_rng, 1.0, 0.0);
    for (double eps : {-1.0, 0.5, 3.0}) {
      std::mt19937_64 g(s);
      const Instance in = MakeInstance(g, 1.0, eps);
      double flow_diff = 0.0;
      for (size_t j = 0; j < in.many.size(); ++j) {
        flow_diff = std::max(flow_diff, (in.many[j].u - base.many[j].u).norm() /
                                            std::max(1.0, base.many[j].u.norm()));
      }
      Note(r, flow_diff, tol, "generated flows");
      const std::vector<std::pair<std::string, std::function<Model(const Instance&)>>> solvers = {
          {"GS-diff", [](const Instance& x) { return Model(RsDiffModel{SolveGsDiff(x.many), 0.0, {0.0, 720.0}}); }},
          {"RS-ConstVel", [&](const Instance& x) { return Model(SolveRsConstVel(x.many, rs)); }},
          {"RS-ConstAcc-5pt", [&](const Instance& x) { return Model(NearestK(SolveRsConstAcc5pt(x.sample, rs), x.k)); }},
          {"RS-ConstAcc-LS", [&](const Instance& x) { return Model(SolveRsConstAccLs(x.many, rs, {}, x.k)); }},
      };
      for (const auto& [name, solve] : solvers) {
        try {
          Note(r, RelDiff(solve(in), solve(base), base.probe), tol, name);
        } catch (const std::exception& e) {
          Note(r, INFINITY, tol, name + " threw " + e.what());
        }
      }
    }
    ++r.instances;
  }
  return r;
}

// Global translation (x only for RS: a y shift changes readout times) and
// uniform scaling of pixel coordinates, flows and h scaled alike.
inline SuiteResult NormalizationSuite(int n, uint64_t seed, double tol = 1e-9) {
  SuiteResult r;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> S(0.3, 3.0), T(-800.0, 800.0);
  for (int i = 0; i < n; ++i) {
    const Instance in = MakeInstance(rng, 1.0);
    const double s = S(rng);
    const Pixel t_gs(T(rng), T(rng)), t_rs(T(rng), 0.0);
    auto xf = [&](const std::vector<Correspondence>& c, const Pixel& t) {
      std::vector<Correspondence> o;
      for (const Correspondence& x : c) o.push_back({s * x.p1 + t, s * x.u});
      return o;
    };
    auto probe_xf = [&](const Pixel& t) { return xf(in.probe, t); };
    const RsParams rs{1.0, 720.0}, rs_s{1.0, 720.0 * s};

    auto cmp = [&](const Model& a, const Model& b, const Pixel& t, const std::string& name) {
      // a lives in the transformed frame; compare on transformed probes.
      double worst = 0.0;
      const auto pt = probe_xf(t);
      for (size_t j = 0; j < pt.size(); ++j) {
        const Flow fb = s * Predict(b, in.probe[j]);
        worst = std::max(worst, (Predict(a, pt[j]) - fb).norm() / std::max(fb.norm(), 1.0));
      }
      Note(r, worst, tol, name);
    };
    try {
      // GS-disc on the discrete transfer of the same points.
      std::vector<Correspondence> four(in.many.begin(), in.many.begin() + 4);
      cmp(DiscreteHomography{SolveGsDiscrete(xf(four, t_gs))}, DiscreteHomography{SolveGsDiscrete(four)},
          t_gs, "GS-disc");
      cmp(DiscreteHomography{SolveGsDiscrete(xf(in.many, t_gs))},
          DiscreteHomography{SolveGsDiscrete(in.many)}, t_gs, "GS-disc-LS");
      cmp(RsDiffModel{SolveGsDiff(xf(in.many, t_gs)), 0.0, {0.0, 720.0 * s}},
          RsDiffModel{SolveGsDiff(in.many), 0.0, {0.0, 720.0}}, t_gs, "GS-diff");
      cmp(SolveRsConstVel(xf(in.many, t_rs), rs_s), SolveRsConstVel(in.many, rs), t_rs, "RS-ConstVel");
      cmp(NearestK(SolveRsConstAcc5pt(xf(in.sample, t_rs), rs_s), in.k),
          NearestK(SolveRsConstAcc5pt(in.sample, rs), in.k), t_rs, "RS-ConstAcc-5pt");
      cmp(SolveRsConstAccLs(xf(in.many, t_rs), rs_s, {}, in.k), SolveRsConstAccLs(in.many, rs, {}, in.k),
          t_rs, "RS-ConstAcc-LS");
    } catch (const std::exception& e) {
      Note(r, INFINITY, tol, std::string("solver threw ") + e.what());
    }
    ++r.instances;
  }
  return r;
}

}  // namespace invariance
