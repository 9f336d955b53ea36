#include "rsstitch/pipeline.h"

#include <cmath>
#include <limits>

#include "rsstitch/synthbench.h"

namespace rsstitch {

std::optional<StitchMode> ParseStitchMode(const std::string& name) {
  if (name == "gs") return StitchMode::kGs;
  if (name == "apap") return StitchMode::kApap;
  if (name == "rs") return StitchMode::kRs;
  if (name == "rs-apap") return StitchMode::kRsApap;
  if (name == "rs-apap-rectify") return StitchMode::kRsApapRectify;
  return std::nullopt;
}

std::string StitchModeName(StitchMode mode) {
  switch (mode) {
    case StitchMode::kGs:
      return "gs";
    case StitchMode::kApap:
      return "apap";
    case StitchMode::kRs:
      return "rs";
    case StitchMode::kRsApap:
      return "rs-apap";
    case StitchMode::kRsApapRectify:
      return "rs-apap-rectify";
  }
  return "unknown";
}

EstimatedWarp EstimateWarp(std::span<const Correspondence> corrs, const PipelineConfig& config,
                           int width, int height) {
  EstimatedWarp out;
  const bool gs = config.mode == StitchMode::kGs || config.mode == StitchMode::kApap;
  if (gs) {
    out.solver = SolverId::kGsDiscrete;
  } else if (config.ransac.rs.gamma == 0.0) {
    out.solver = SolverId::kGsDiff;
    out.notes.push_back("gamma = 0: k is unobservable, using the GS differential solver");
  } else {
    out.solver = SolverId::kRsConstAcc;
  }
  out.estimate = Ransac(corrs, out.solver, config.ransac);
  out.global = out.estimate.model;

  std::vector<Correspondence> inliers;
  for (size_t i : out.estimate.inliers) inliers.push_back(corrs[i]);
  if (config.refit) {
    std::optional<double> k_seed;
    if (const auto* m = std::get_if<RsDiffModel>(&out.global)) k_seed = m->k;
    try {
      out.global = FitLeastSquares(out.solver, inliers, config.ransac.rs,
                                   config.ransac.k_range, k_seed);
    } catch (const Error& e) {
      out.notes.push_back(std::string("refit skipped: ") + e.what());
    }
  }

  switch (config.mode) {
    case StitchMode::kGs:
      out.warp = std::get<DiscreteHomography>(out.global);
      break;
    case StitchMode::kRs:
      out.warp = std::get<RsDiffModel>(out.global);
      break;
    case StitchMode::kApap:
      out.warp = BuildApapField(inliers, FieldMode::kGsDiscrete, 0.0, config.ransac.rs,
                                config.weights, width, height);
      break;
    case StitchMode::kRsApap:
    case StitchMode::kRsApapRectify: {
      const RsDiffModel& m = std::get<RsDiffModel>(out.global);
      const FieldMode fm =
          m.rs.gamma == 0.0 ? FieldMode::kGsDifferential : FieldMode::kRsDifferential;
      out.warp = BuildApapField(inliers, fm, m.k, config.ransac.rs, config.weights, width,
                                height);
      break;
    }
  }
  if (const auto* f = std::get_if<WarpField>(&out.warp); f && !f->fallback_cells.empty()) {
    out.notes.push_back(std::to_string(f->fallback_cells.size()) +
                        " field cells fell back to the global model");
  }
  return out;
}

StitchResult RunStitch(const Raster& img1, const Raster& img2,
                       std::span<const Correspondence> corrs, const PipelineConfig& config) {
  StitchResult r;
  r.estimate = EstimateWarp(corrs, config, img1.width, img1.height);
  StitchOptions opts;
  opts.blend = config.blend;
  opts.rectify = config.mode == StitchMode::kRsApapRectify;
  r.canvas = WarpAndStitch(img1, img2, r.estimate.warp, opts);
  std::vector<uint8_t> overlap(r.canvas.layers[0].mask.size());
  for (size_t i = 0; i < overlap.size(); ++i) {
    overlap[i] = r.canvas.layers[0].mask[i] && r.canvas.layers[1].mask[i];
  }
  try {
    r.rmse_ncc = RmseNcc(r.canvas.layers[0], r.canvas.layers[1], overlap);
  } catch (const Error&) {
    r.rmse_ncc = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

nlohmann::json ModelJson(const Model& model) {
  nlohmann::json j;
  auto mat = [](const Matrix3& H) {
    nlohmann::json a = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) a.push_back({H(r, 0), H(r, 1), H(r, 2)});
    return a;
  };
  if (const auto* d = std::get_if<DiscreteHomography>(&model)) {
    j["type"] = "discrete-homography";
    j["H"] = mat(d->H);
  } else {
    const RsDiffModel& m = std::get<RsDiffModel>(model);
    j["type"] = m.rs.gamma == 0.0 ? "gs-differential" : "rs-differential";
    j["H"] = mat(m.H);
    if (m.rs.gamma != 0.0) j["k"] = m.k;
    j["gamma"] = m.rs.gamma;
    j["h"] = m.rs.height;
  }
  return j;
}

nlohmann::json EstimateReport(const EstimatedWarp& est, std::span<const Correspondence> corrs) {
  nlohmann::json j;
  j["solver"] = SolverName(est.solver);
  j["model"] = ModelJson(est.global);
  j["inlier_count"] = est.estimate.inliers.size();
  j["correspondences"] = corrs.size();
  std::vector<double> all, in;
  for (const Correspondence& c : corrs) all.push_back(Residual(est.global, c));
  for (size_t i : est.estimate.inliers) in.push_back(all[i]);
  auto summary = [](const std::vector<double>& r) {
    nlohmann::json s;
    if (r.empty()) return s;
    double sum = 0.0;
    for (double v : r) sum += v;
    s["mean"] = sum / r.size();
    s["median"] = MedianOf(r);
    const auto cdf = EvalCdf(r);
    nlohmann::json pts = nlohmann::json::array();
    for (double px : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      pts.push_back({{"px", px}, {"fraction", CdfAt(cdf, px)}});
    }
    s["cdf"] = std::move(pts);
    return s;
  };
  j["residuals_inliers"] = summary(in);
  j["residuals_all"] = summary(all);
  j["ransac"] = {{"trials", est.estimate.stats.trials},
                 {"solver_failures", est.estimate.stats.solver_failures},
                 {"candidates", est.estimate.stats.candidates},
                 {"admissible", est.estimate.stats.admissible},
                 {"best_trial", est.estimate.stats.best_trial}};
  if (const auto* f = std::get_if<WarpField>(&est.warp)) {
    j["field"] = {{"mode", FieldModeName(f->mode)},
                  {"cols", f->grid.cols},
                  {"rows", f->grid.rows},
                  {"fallback_cells", f->fallback_cells.size()}};
  }
  j["notes"] = est.notes;
  return j;
}

}  // namespace rsstitch
