#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsstitch/render.h"
#include "rsstitch/robust.h"
#include "rsstitch/warpfield.h"

namespace rsstitch {

// gs: one discrete homography; apap: moving DLT field; rs: one RS model;
// rs-apap: RS field at the robust k; rs-apap-rectify: rs-apap rendered into
// the rectified canvas.
enum class StitchMode { kGs, kApap, kRs, kRsApap, kRsApapRectify };

std::optional<StitchMode> ParseStitchMode(const std::string& name);
std::string StitchModeName(StitchMode mode);

struct PipelineConfig {
  StitchMode mode = StitchMode::kRsApap;
  RansacParams ransac;
  WeightParams weights;
  // Least-squares refit on the RANSAC inliers before building fields.
  bool refit = true;
  BlendMode blend = BlendMode::kLinear;
};

struct EstimatedWarp {
  Warp warp;
  SolverId solver = SolverId::kGsDiscrete;
  RobustEstimate estimate;
  // Global model after the optional refit.
  Model global;
  std::vector<std::string> notes;
};

// RANSAC with the mode's solver (GS-disc or RS-ConstAcc; GS-diff when the RS
// modes get gamma = 0), optional refit, optional APAP field.
EstimatedWarp EstimateWarp(std::span<const Correspondence> corrs, const PipelineConfig& config,
                           int width, int height);

struct StitchResult {
  EstimatedWarp estimate;
  Canvas canvas;
  // rmse_ncc of the two resampled sources over their overlap; NaN if the
  // metric is undefined.
  double rmse_ncc = 0.0;
};

StitchResult RunStitch(const Raster& img1, const Raster& img2,
                       std::span<const Correspondence> corrs, const PipelineConfig& config);

nlohmann::json ModelJson(const Model& model);
nlohmann::json EstimateReport(const EstimatedWarp& est, std::span<const Correspondence> corrs);

}  // namespace rsstitch
