#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rsstitch/core.h"
#include "rsstitch/raster.h"
#include "rsstitch/robust.h"
#include "rsstitch/warpfield.h"

namespace rsstitch {

// Anything that maps frame-1 points to frame-2 points.
using Warp = std::variant<DiscreteHomography, RsDiffModel, WarpField>;

enum class Frame { kFirst, kSecond };

// Stitching map: solves y2 = y1 + (beta2(y2) - beta1(y1)) f_y as a quadratic
// in y2 and takes the root nearest y1 + f_y, with f = FlowGs(H, p1). nullopt
// when no real root lies in [-0.5 h, 1.5 h].
std::optional<Pixel> ForwardMapRs(const RsDiffModel& model, const Pixel& p1);
std::optional<Pixel> ForwardMap(const Warp& warp, const Pixel& p1);

// Jacobian of ForwardMapRs at p1 (implicit differentiation through y2).
std::optional<Eigen::Matrix2d> ForwardMapRsJacobian(const RsDiffModel& model,
                                                    const Pixel& p1);

// q -> p1 with ForwardMap(p1) = q. Newton seeded by the GS inverse
// q - FlowGs(H, q); exact for discrete homographies.
std::optional<Pixel> InverseMap(const Warp& warp, const Pixel& q);

// Rectification: solves x = g + beta(y) FlowGs(H, g) for the GS-canvas point
// g, where beta is beta1 (frame 1) or beta2 (frame 2) at the observed
// scanline y = x.y. Newton, step < 1e-8 px, at most 20 iterations; nullopt on
// non-convergence or when g drifts more than max_shift from x.
std::optional<Pixel> RectifyPoint(const RsDiffModel& model, const Pixel& x,
                                  Frame frame = Frame::kFirst,
                                  double max_shift = std::numeric_limits<double>::infinity());
std::optional<Pixel> RectifyPoint(const Warp& warp, const Pixel& x,
                                  Frame frame = Frame::kFirst,
                                  double max_shift = std::numeric_limits<double>::infinity());

// Inverse of RectifyPoint: g -> x, closed form (quadratic in the scanline).
std::optional<Pixel> UnrectifyPoint(const RsDiffModel& model, const Pixel& g,
                                    Frame frame = Frame::kFirst);
std::optional<Pixel> UnrectifyPoint(const Warp& warp, const Pixel& g,
                                    Frame frame = Frame::kFirst);

// |p2 - p1 - Beta(k, y1, y2) FlowGs(H, p1)|: defining-equation residual of
// the stitching map.
double StitchEquationResidual(const RsDiffModel& model, const Pixel& p1, const Pixel& p2);
// |x - g - beta(x.y) FlowGs(H, g)|.
double RectifyEquationResidual(const RsDiffModel& model, const Pixel& x, const Pixel& g,
                               Frame frame = Frame::kFirst);

// Sequential application of models[0..count) starting at p0.
std::optional<Pixel> ComposeForward(std::span<const Warp> models, const Pixel& p0,
                                    size_t count);

enum class BlendMode {
  kLinear,   // feathering by distance to the source border
  kAverage,  // equal weights in the overlap
  kLast,     // later sources drawn on top
};

std::optional<BlendMode> ParseBlendMode(const std::string& name);

struct StitchOptions {
  BlendMode blend = BlendMode::kLinear;
  // Render into the GS canvas of frame 1's first scanline.
  bool rectify = false;
  // Spacing of the boundary ring used for canvas bounds.
  double ring_spacing = 2.0;
  // Canvas is clipped to this many reference-frame sizes on each side.
  double max_extent_factor = 3.0;
};

struct Canvas {
  // Reference coordinates of canvas pixel (0, 0).
  Pixel offset = Pixel::Zero();
  int width = 0;
  int height = 0;
  bool rectified = false;
  Raster image;
  // Overlap diagnostic: red = |g1 - g2|, green = 255 - |g1 - g2|.
  Raster diff;
  // Each source resampled onto the canvas, with its coverage as mask.
  std::vector<Raster> layers;
  size_t overlap_pixels = 0;
  std::vector<std::string> warnings;
};

// img1 is warped into img2's frame (or both into the rectified canvas).
Canvas WarpAndStitch(const Raster& img1, const Raster& img2, const Warp& warp,
                     const StitchOptions& options = {});

// Frame 1 alone resampled onto its rectified GS canvas.
Canvas RectifyImage(const Raster& img, const Warp& warp, const StitchOptions& options = {});

// models[i] maps frame i to frame i + 1. Rendered once into frame 0's canvas
// by composing the maps.
Canvas ChainPairwise(const std::vector<Raster>& frames, const std::vector<Warp>& models,
                     const StitchOptions& options = {});

nlohmann::json CanvasMetadata(const Canvas& canvas);

}  // namespace rsstitch
