#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsstitch/core.h"
#include "rsstitch/robust.h"

namespace rsstitch {

struct WeightParams {
  // Gaussian scale in pixels; ForImage() sets 0.1 x image diagonal.
  double sigma = 146.86;
  // Weight floor in (0, 1].
  double tau = 0.0025;
  // Grid cell edge in pixels.
  double cell = 40.0;

  static WeightParams ForImage(int width, int height);
  void Validate() const;
};

// max(exp(-|x - xi|^2 / sigma^2), tau)
double Weight(const Pixel& x, const Pixel& xi, const WeightParams& wp);

enum class FieldMode {
  kGsDiscrete,      // moving DLT
  kGsDifferential,  // weighted differential homography, gamma = 0
  kRsDifferential,  // weighted RS flow fit at a shared k
};

std::string FieldModeName(FieldMode mode);

// Cell (c, r) covers x in [c*cell - 0.5, (c+1)*cell - 0.5) and likewise in y,
// in pixel-center coordinates.
struct GridGeometry {
  int width = 0;
  int height = 0;
  double cell = 40.0;
  int cols = 0;
  int rows = 0;

  static GridGeometry Make(int width, int height, double cell);
  Pixel Center(int col, int row) const;
  // Nearest cell; points outside the image use the closest border cell.
  int IndexAt(const Pixel& p) const;
  int size() const { return cols * rows; }
};

struct WarpField {
  FieldMode mode = FieldMode::kGsDiscrete;
  GridGeometry grid;
  // Row-major over (row, col). Discrete homographies or differential H.
  std::vector<Matrix3> cells;
  Matrix3 global = Matrix3::Identity();
  // Shared acceleration (RS only) and readout parameters.
  double k = 0.0;
  RsParams rs;
  WeightParams weights;
  // Cells whose weighted system was degenerate and hold the global model.
  std::vector<int> fallback_cells;
  // s8 / s1 of each cell's weighted system (0 for fallback cells).
  std::vector<double> conditioning;
  size_t inlier_count = 0;
  std::string inlier_set_id;

  Model CellModel(int index) const;
  Model ModelAt(const Pixel& p) const { return CellModel(grid.IndexAt(p)); }
  Model GlobalModel() const;
};

// APAP field over the inliers. k is ignored for the GS modes. Throws when the
// uniform-weight (global) system is degenerate.
WarpField BuildApapField(std::span<const Correspondence> inliers,
                         FieldMode mode, double k, const RsParams& rs,
                         const WeightParams& wp, int width, int height);

// Order-sensitive hash of the correspondence coordinates (hex).
std::string InlierSetId(std::span<const Correspondence> corrs);

nlohmann::json FieldToJson(const WarpField& field);
WarpField FieldFromJson(const nlohmann::json& j);

}  // namespace rsstitch
