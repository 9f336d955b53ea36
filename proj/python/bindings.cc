#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rsstitch/bench.h"
#include "rsstitch/core.h"
#include "rsstitch/io.h"
#include "rsstitch/pipeline.h"
#include "rsstitch/render.h"
#include "rsstitch/robust.h"
#include "rsstitch/synthbench.h"

namespace py = pybind11;
using namespace rsstitch;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<Correspondence> ToCorrs(const F64Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw py::value_error("correspondences must be an (N, 4) array");
  auto r = a.unchecked<2>();
  std::vector<Correspondence> out;
  out.reserve(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    out.push_back(Correspondence::FromPoints(Pixel(r(i, 0), r(i, 1)), Pixel(r(i, 2), r(i, 3))));
  }
  return out;
}

F64Array FromCorrs(const std::vector<Correspondence>& c) {
  F64Array a({static_cast<py::ssize_t>(c.size()), py::ssize_t{4}});
  auto w = a.mutable_unchecked<2>();
  for (size_t i = 0; i < c.size(); ++i) {
    w(i, 0) = c[i].p1.x();
    w(i, 1) = c[i].p1.y();
    w(i, 2) = c[i].p2().x();
    w(i, 3) = c[i].p2().y();
  }
  return a;
}

std::vector<Pixel> ToPoints(const F64Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("points must be an (N, 2) array");
  auto r = a.unchecked<2>();
  std::vector<Pixel> out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.emplace_back(r(i, 0), r(i, 1));
  return out;
}

// nullopt rows become NaN
template <typename Fn>
F64Array MapPoints(const F64Array& pts, Fn fn) {
  const auto p = ToPoints(pts);
  F64Array out({static_cast<py::ssize_t>(p.size()), py::ssize_t{2}});
  auto w = out.mutable_unchecked<2>();
  for (size_t i = 0; i < p.size(); ++i) {
    const std::optional<Pixel> q = fn(p[i]);
    w(i, 0) = q ? q->x() : std::numeric_limits<double>::quiet_NaN();
    w(i, 1) = q ? q->y() : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Raster ToRaster(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("image must be (H, W) or (H, W, C)");
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  if (c != 1 && c != 3) throw py::value_error("image must have 1 or 3 channels");
  Raster r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), c);
  std::copy(a.data(), a.data() + r.data.size(), r.data.begin());
  return r;
}

U8Array FromRaster(const Raster& r) {
  std::vector<py::ssize_t> shape{r.height, r.width};
  if (r.channels > 1) shape.push_back(r.channels);
  U8Array a(shape);
  std::copy(r.data.begin(), r.data.end(), a.mutable_data());
  return a;
}

U8Array MaskArray(const Raster& r) {
  U8Array a({r.height, r.width});
  uint8_t* d = a.mutable_data();
  for (size_t i = 0; i < static_cast<size_t>(r.width) * r.height; ++i) {
    d[i] = r.mask.empty() || r.mask[i] ? 255 : 0;
  }
  return a;
}

Frame ToFrame(int f) {
  if (f != 1 && f != 2) throw py::value_error("frame must be 1 or 2");
  return f == 1 ? Frame::kFirst : Frame::kSecond;
}

SolverId ResolveSolver(const std::string& name, double gamma) {
  if (name == "auto") return gamma == 0.0 ? SolverId::kGsDiscrete : SolverId::kRsConstAcc;
  const auto id = ParseSolverId(name);
  if (!id) throw Error(ErrorCode::kParameterDomain, "unknown solver: " + name);
  return *id;
}

RansacParams MakeRansac(double gamma, double height, double threshold, int trials, uint64_t seed,
                        int threads) {
  RansacParams p;
  p.rs = {gamma, height};
  p.threshold = threshold;
  p.trials = trials;
  p.seed = seed;
  p.threads = threads;
  return p;
}

}  // namespace

PYBIND11_MODULE(_rsstitch, m) {
  m.doc() = "rolling-shutter aware stitching core";

  // messages carry the error code: "<code>: <what>"
  static py::handle error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type.ptr(), (std::string(ErrorCodeName(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("beta1", [](double k, double y1, double gamma, double h) { return Beta1(k, y1, {gamma, h}); },
        py::arg("k"), py::arg("y1"), py::arg("gamma") = 1.0, py::arg("h") = 720.0);
  m.def("beta2", [](double k, double y2, double gamma, double h) { return Beta2(k, y2, {gamma, h}); },
        py::arg("k"), py::arg("y2"), py::arg("gamma") = 1.0, py::arg("h") = 720.0);

  m.def(
      "flow_gs",
      [](const Matrix3& H, const F64Array& pts) {
        return MapPoints(pts, [&](const Pixel& p) -> std::optional<Pixel> { return FlowGs(H, p); });
      },
      py::arg("H"), py::arg("points"));

  m.def(
      "forward_map",
      [](const Matrix3& H, double k, double gamma, double h, const F64Array& pts) {
        const RsDiffModel model{H, k, {gamma, h}};
        return MapPoints(pts, [&](const Pixel& p) { return ForwardMapRs(model, p); });
      },
      py::arg("H"), py::arg("k"), py::arg("gamma"), py::arg("h"), py::arg("points"));

  m.def(
      "rectify_points",
      [](const Matrix3& H, double k, double gamma, double h, const F64Array& pts, int frame) {
        const RsDiffModel model{H, k, {gamma, h}};
        return MapPoints(pts, [&](const Pixel& p) { return RectifyPoint(model, p, ToFrame(frame)); });
      },
      py::arg("H"), py::arg("k"), py::arg("gamma"), py::arg("h"), py::arg("points"), py::arg("frame") = 1);

  m.def(
      "_solve",
      [](const F64Array& corrs, const std::string& solver, double gamma, double height, double threshold,
         int trials, uint64_t seed, bool refit, int threads) {
        const auto c = ToCorrs(corrs);
        const SolverId id = ResolveSolver(solver, gamma);
        const RansacParams p = MakeRansac(gamma, height, threshold, trials, seed, threads);
        py::gil_scoped_release release;
        const RobustEstimate e = Ransac(c, id, p);
        Model model = e.model;
        if (refit) {
          std::vector<Correspondence> in;
          for (size_t i : e.inliers) in.push_back(c[i]);
          std::optional<double> k_seed;
          if (const auto* rs = std::get_if<RsDiffModel>(&model)) k_seed = rs->k;
          model = FitLeastSquares(id, in, p.rs, p.k_range, k_seed);
        }
        nlohmann::json j = ModelJson(model);
        j["solver"] = SolverName(id);
        j["inliers"] = e.inliers;
        std::vector<double> res;
        for (const auto& x : c) res.push_back(Residual(model, x));
        j["residuals"] = res;
        return j.dump();
      },
      py::arg("corrs"), py::arg("solver"), py::arg("gamma"), py::arg("height"), py::arg("threshold"),
      py::arg("trials"), py::arg("seed"), py::arg("refit"), py::arg("threads"));

  m.def(
      "_stitch",
      [](const U8Array& img1, const U8Array& img2, const F64Array& corrs, const std::string& mode, double gamma,
         double threshold, int trials, uint64_t seed, const std::string& blend) {
        const auto c = ToCorrs(corrs);
        const Raster a = ToRaster(img1), b = ToRaster(img2);
        PipelineConfig cfg;
        const auto sm = ParseStitchMode(mode);
        if (!sm) throw Error(ErrorCode::kParameterDomain, "unknown mode: " + mode);
        const auto bm = ParseBlendMode(blend);
        if (!bm) throw Error(ErrorCode::kParameterDomain, "unknown blend: " + blend);
        cfg.mode = *sm;
        cfg.blend = *bm;
        cfg.ransac = MakeRansac(gamma, a.height, threshold, trials, seed, 0);
        cfg.weights = WeightParams::ForImage(a.width, a.height);
        StitchResult r;
        {
          py::gil_scoped_release release;
          r = RunStitch(a, b, c, cfg);
        }
        nlohmann::json rep = EstimateReport(r.estimate, c);
        rep["rmse_ncc"] = std::isfinite(r.rmse_ncc) ? nlohmann::json(r.rmse_ncc) : nlohmann::json(nullptr);
        rep["canvas"] = CanvasMetadata(r.canvas);
        return py::make_tuple(FromRaster(r.canvas.image), MaskArray(r.canvas.image), FromRaster(r.canvas.diff),
                              rep.dump());
      },
      py::arg("img1"), py::arg("img2"), py::arg("corrs"), py::arg("mode"), py::arg("gamma"), py::arg("threshold"),
      py::arg("trials"), py::arg("seed"), py::arg("blend"));

  m.def(
      "_synth",
      [](uint64_t seed, double omega_deg, double v, double k, int points, double gamma, double sigma_g,
         const std::string& generator, bool images) {
        SceneParams sp;
        sp.omega_deg = omega_deg;
        sp.v = v;
        sp.k = k;
        sp.num_points = points;
        if (generator != "exact" && generator != "first-order") {
          throw Error(ErrorCode::kParameterDomain, "generator must be exact or first-order");
        }
        sp.mode = generator == "exact" ? GenMode::kExact : GenMode::kFirstOrder;
        const SyntheticScene s = RandomScene(seed, sp, CameraConfig::WithGamma(gamma));
        const GeneratedPair g = GenCorrespondences(s, sigma_g, seed + 1, sp.mode);
        nlohmann::json scene = SceneToJson(s);
        scene["truth"] = ModelJson(g.truth);
        py::object f1 = py::none(), f2 = py::none();
        if (images) {
          f1 = FromRaster(RenderPlaneRs(s, Frame::kFirst));
          f2 = FromRaster(RenderPlaneRs(s, Frame::kSecond));
        }
        return py::make_tuple(FromCorrs(g.noisy), FromCorrs(g.clean), scene.dump(), f1, f2);
      },
      py::arg("seed"), py::arg("omega_deg"), py::arg("v"), py::arg("k"), py::arg("points"), py::arg("gamma"),
      py::arg("sigma_g"), py::arg("generator"), py::arg("images"));

  m.def(
      "_run_sweep",
      [](const std::string& toml_text) {
        const BenchSpec b = ParseBenchSpec(toml_text);
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = RunSweep(b.sweep);
        }
        return py::make_tuple(SweepCsv(rows), CheckResultsJson(EvaluateChecks(b.checks, rows)).dump());
      },
      py::arg("toml_text"));

  m.def(
      "rmse_ncc",
      [](const U8Array& a, const U8Array& b) { return RmseNcc(ToRaster(a), ToRaster(b)); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "_parse_correspondences",
      [](const std::string& text, const std::string& source) {
        const CorrespondenceFile f = ParseCorrespondences(text, source);
        py::dict header;
        header["width"] = f.width;
        header["height"] = f.height;
        header["gamma"] = f.gamma;
        header["pair"] = f.pair;
        return py::make_tuple(FromCorrs(f.corrs), header);
      },
      py::arg("text"), py::arg("source") = "<input>");
}
