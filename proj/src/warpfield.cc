#include "rsstitch/warpfield.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <thread>

#include "rsstitch/solvers.h"

namespace rsstitch {

WeightParams WeightParams::ForImage(int width, int height) {
  WeightParams wp;
  wp.sigma = 0.1 * std::hypot(static_cast<double>(width), static_cast<double>(height));
  return wp;
}

void WeightParams::Validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kParameterDomain, "sigma must be > 0");
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::kParameterDomain, "tau must lie in (0, 1]");
  }
  if (!(cell >= 1.0) || !std::isfinite(cell)) {
    throw Error(ErrorCode::kParameterDomain, "cell must be >= 1 pixel");
  }
}

double Weight(const Pixel& x, const Pixel& xi, const WeightParams& wp) {
  const double r2 = (x - xi).squaredNorm();
  return std::max(std::exp(-r2 / (wp.sigma * wp.sigma)), wp.tau);
}

std::string FieldModeName(FieldMode mode) {
  switch (mode) {
    case FieldMode::kGsDiscrete:
      return "gs-discrete";
    case FieldMode::kGsDifferential:
      return "gs-differential";
    case FieldMode::kRsDifferential:
      return "rs-differential";
  }
  return "unknown";
}

GridGeometry GridGeometry::Make(int width, int height, double cell) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kParameterDomain, "grid needs a positive extent");
  }
  GridGeometry g;
  g.width = width;
  g.height = height;
  g.cell = cell;
  g.cols = std::max(1, static_cast<int>(std::ceil(width / cell)));
  g.rows = std::max(1, static_cast<int>(std::ceil(height / cell)));
  return g;
}

Pixel GridGeometry::Center(int col, int row) const {
  return Pixel((col + 0.5) * cell - 0.5, (row + 0.5) * cell - 0.5);
}

int GridGeometry::IndexAt(const Pixel& p) const {
  const double fx = std::floor((p.x() + 0.5) / cell);
  const double fy = std::floor((p.y() + 0.5) / cell);
  const int c = static_cast<int>(std::clamp(fx, 0.0, static_cast<double>(cols - 1)));
  const int r = static_cast<int>(std::clamp(fy, 0.0, static_cast<double>(rows - 1)));
  return r * cols + c;
}

namespace {

Model MakeModel(const WarpField& f, const Matrix3& H) {
  if (f.mode == FieldMode::kGsDiscrete) return DiscreteHomography{H};
  return RsDiffModel{H, f.mode == FieldMode::kRsDifferential ? f.k : 0.0, f.rs};
}

}  // namespace

Model WarpField::CellModel(int index) const { return MakeModel(*this, cells.at(index)); }

Model WarpField::GlobalModel() const { return MakeModel(*this, global); }

std::string InlierSetId(std::span<const Correspondence> corrs) {
  // FNV-1a over the raw doubles.
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const Correspondence& c : corrs) {
    mix(c.p1.x());
    mix(c.p1.y());
    mix(c.u.x());
    mix(c.u.y());
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

WarpField BuildApapField(std::span<const Correspondence> inliers,
                         FieldMode mode, double k, const RsParams& rs,
                         const WeightParams& wp, int width, int height) {
  wp.Validate();
  WarpField field;
  field.mode = mode;
  field.grid = GridGeometry::Make(width, height, wp.cell);
  field.weights = wp;
  field.rs = rs;
  field.inlier_count = inliers.size();
  field.inlier_set_id = InlierSetId(inliers);
  if (mode == FieldMode::kRsDifferential) {
    if (!std::isfinite(k) || k <= -2.0) {
      throw Error(ErrorCode::kParameterDomain, "field k must be finite and > -2");
    }
    rs.Validate();
    field.k = k;
  } else {
    field.k = 0.0;
    if (mode == FieldMode::kGsDifferential) field.rs.gamma = 0.0;
  }
  const size_t min_points = mode == FieldMode::kRsDifferential ? 5 : 4;
  if (inliers.size() < min_points) {
    throw Error(ErrorCode::kDegenerateSample, "too few inliers for a field");
  }

  // One global similarity per image so all cells share coordinate frames.
  std::vector<Pixel> p1, p2;
  for (const Correspondence& c : inliers) {
    p1.push_back(c.p1);
    p2.push_back(c.p2());
  }
  const Normalization n1 = ComputeNormalization(p1);
  const Normalization n2 = ComputeNormalization(p2);
  const Normalization nd = ComputeNormalization(inliers);

  auto solve = [&](std::span<const double> w, double* cond) -> Matrix3 {
    switch (mode) {
      case FieldMode::kGsDiscrete:
        return SolveGsDiscreteWeighted(inliers, w, n1, n2, cond);
      case FieldMode::kGsDifferential:
        return SolveGsDiffWeighted(inliers, w, nd, cond);
      case FieldMode::kRsDifferential:
        return SolveRsWeighted(inliers, w, k, rs, nd, cond);
    }
    return Matrix3::Zero();
  };

  const std::vector<double> uniform(inliers.size(), 1.0);
  double global_cond = 0.0;
  field.global = solve(uniform, &global_cond);

  const int n_cells = field.grid.size();
  field.cells.assign(n_cells, field.global);
  field.conditioning.assign(n_cells, 0.0);
  std::vector<char> fell_back(n_cells, 0);

  auto work = [&](int begin, int end) {
    std::vector<double> w(inliers.size());
    for (int idx = begin; idx < end; ++idx) {
      const Pixel x = field.grid.Center(idx % field.grid.cols, idx / field.grid.cols);
      for (size_t i = 0; i < inliers.size(); ++i) w[i] = Weight(x, inliers[i].p1, wp);
      try {
        double cond = 0.0;
        field.cells[idx] = solve(w, &cond);
        field.conditioning[idx] = cond;
      } catch (const Error&) {
        field.cells[idx] = field.global;
        fell_back[idx] = 1;
      }
    }
  };
  const int threads = std::clamp(DefaultThreadCount(), 1, n_cells);
  if (threads == 1) {
    work(0, n_cells);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(work, n_cells * t / threads, n_cells * (t + 1) / threads);
    }
    for (std::thread& th : pool) th.join();
  }
  for (int i = 0; i < n_cells; ++i) {
    if (fell_back[i]) field.fallback_cells.push_back(i);
  }
  return field;
}

namespace {

nlohmann::json MatrixJson(const Matrix3& H) {
  nlohmann::json a = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(H(r, c));
  }
  return a;
}

Matrix3 MatrixFrom(const nlohmann::json& a) {
  if (!a.is_array() || a.size() != 9) {
    throw Error(ErrorCode::kSchema, "matrix must be 9 numbers (row-major)");
  }
  Matrix3 H;
  for (int i = 0; i < 9; ++i) H(i / 3, i % 3) = a.at(i).get<double>();
  return H;
}

}  // namespace

nlohmann::json FieldToJson(const WarpField& f) {
  nlohmann::json j;
  j["mode"] = FieldModeName(f.mode);
  j["grid"] = {{"width", f.grid.width},
               {"height", f.grid.height},
               {"cell", f.grid.cell},
               {"cols", f.grid.cols},
               {"rows", f.grid.rows}};
  j["k"] = f.k;
  j["gamma"] = f.rs.gamma;
  j["h"] = f.rs.height;
  j["weights"] = {{"sigma", f.weights.sigma}, {"tau", f.weights.tau}};
  j["global"] = MatrixJson(f.global);
  nlohmann::json cells = nlohmann::json::array();
  for (const Matrix3& H : f.cells) cells.push_back(MatrixJson(H));
  j["cells"] = std::move(cells);
  j["fallback_cells"] = f.fallback_cells;
  j["conditioning"] = f.conditioning;
  j["inlier_count"] = f.inlier_count;
  j["inlier_set_id"] = f.inlier_set_id;
  return j;
}

WarpField FieldFromJson(const nlohmann::json& j) {
  try {
    WarpField f;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "gs-discrete") {
      f.mode = FieldMode::kGsDiscrete;
    } else if (mode == "gs-differential") {
      f.mode = FieldMode::kGsDifferential;
    } else if (mode == "rs-differential") {
      f.mode = FieldMode::kRsDifferential;
    } else {
      throw Error(ErrorCode::kSchema, "unknown field mode '" + mode + "'");
    }
    const auto& g = j.at("grid");
    f.grid = GridGeometry::Make(g.at("width").get<int>(), g.at("height").get<int>(),
                                g.at("cell").get<double>());
    f.k = j.at("k").get<double>();
    f.rs.gamma = j.at("gamma").get<double>();
    f.rs.height = j.at("h").get<double>();
    f.weights.sigma = j.at("weights").at("sigma").get<double>();
    f.weights.tau = j.at("weights").at("tau").get<double>();
    f.weights.cell = f.grid.cell;
    f.global = MatrixFrom(j.at("global"));
    for (const auto& c : j.at("cells")) f.cells.push_back(MatrixFrom(c));
    if (static_cast<int>(f.cells.size()) != f.grid.size()) {
      throw Error(ErrorCode::kSchema, "cell count does not match the grid");
    }
    if (j.contains("fallback_cells")) {
      f.fallback_cells = j.at("fallback_cells").get<std::vector<int>>();
    }
    if (j.contains("conditioning")) {
      f.conditioning = j.at("conditioning").get<std::vector<double>>();
    }
    f.inlier_count = j.value("inlier_count", size_t{0});
    f.inlier_set_id = j.value("inlier_set_id", std::string());
    f.rs.Validate();
    if (f.mode == FieldMode::kRsDifferential && !(f.k > -2.0)) {
      throw Error(ErrorCode::kSchema, "field k must be > -2");
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("field JSON: ") + e.what());
  }
}

}  // namespace rsstitch
