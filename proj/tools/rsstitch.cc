// rsstitch command-line frontend.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsstitch/bench.h"
#include "rsstitch/io.h"
#include "rsstitch/pipeline.h"
#include "rsstitch/synthbench.h"

using namespace rsstitch;
namespace fs = std::filesystem;

namespace {

struct StageError {
  std::string stage;
  std::string message;
};

template <typename F>
auto Stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw StageError{stage, std::string(ErrorCodeName(e.code())) + ": " + e.what()};
  } catch (const std::exception& e) {
    throw StageError{stage, e.what()};
  }
}

struct CommonOpts {
  std::optional<double> gamma;
  std::string solver = "auto";
  int trials = 1000;
  double threshold = 1.0;
  uint64_t seed = 0;
  std::string k_range = "-1.9,10";
  std::optional<double> sigma;
  double tau = 0.0025;
  int cell = 40;
  int threads = 0;
};

void AddRansacFlags(CLI::App* app, CommonOpts& o) {
  app->add_option("--gamma", o.gamma, "readout ratio in [0,1] (default: file header, else 1)")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--trials", o.trials, "RANSAC trials")->check(CLI::PositiveNumber);
  app->add_option("--threshold", o.threshold, "inlier threshold in px")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "RANSAC seed");
  app->add_option("--k-range", o.k_range, "admissible k interval lo,hi");
  app->add_option("--threads", o.threads, "worker threads (0: RSSTITCH_THREADS or 1)");
}

void AddFieldFlags(CLI::App* app, CommonOpts& o) {
  app->add_option("--sigma", o.sigma, "APAP Gaussian scale in px (default 0.1 * diagonal)")
      ->check(CLI::PositiveNumber);
  app->add_option("--tau", o.tau, "APAP weight floor in [0,1]")->check(CLI::Range(0.0, 1.0));
  app->add_option("--cell", o.cell, "APAP cell size in px")->check(CLI::PositiveNumber);
}

KRange ParseKRange(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw Error(ErrorCode::kParameterDomain, "--k-range wants lo,hi");
  try {
    KRange r{std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    r.Validate();
    return r;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kParameterDomain, "--k-range wants two numbers");
  }
}

RansacParams MakeRansac(const CommonOpts& o, const RsParams& rs) {
  RansacParams p;
  p.trials = o.trials;
  p.threshold = o.threshold;
  p.seed = o.seed;
  p.k_range = ParseKRange(o.k_range);
  p.rs = rs;
  p.threads = o.threads;
  return p;
}

WeightParams MakeWeights(const CommonOpts& o, int w, int h) {
  WeightParams wp = WeightParams::ForImage(w, h);
  if (o.sigma) wp.sigma = *o.sigma;
  wp.tau = o.tau;
  wp.cell = o.cell;
  wp.Validate();
  return wp;
}

CorrespondenceFile LoadCorrs(const std::string& path, const CommonOpts& o) {
  CorrespondenceFile f = ReadCorrespondenceFile(path);
  if (o.gamma) f.gamma = *o.gamma;
  return f;
}

SolverId ChooseSolver(const std::string& name, const CorrespondenceFile& f) {
  if (name == "auto") {
    return f.gamma == 0.0 ? SolverId::kGsDiscrete : SolverId::kRsConstAcc;
  }
  const auto id = ParseSolverId(name);
  if (!id) throw Error(ErrorCode::kParameterDomain, "unknown solver '" + name + "'");
  return *id;
}

void PrintJson(const nlohmann::json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    WriteTextFile(out, text);
  }
}

void PrintWarnings(const std::vector<std::string>& w) {
  for (const std::string& s : w) std::cerr << "warning: " << s << "\n";
}

// ---- solve ----
int CmdSolve(const std::string& corr_path, const CommonOpts& o, const std::string& out) {
  const CorrespondenceFile f = Stage("load", [&] { return LoadCorrs(corr_path, o); });
  const SolverId id = ChooseSolver(o.solver, f);
  EstimatedWarp est;
  Stage("estimate", [&] {
    RansacParams rp = MakeRansac(o, f.Rs());
    est.solver = id;
    est.estimate = Ransac(f.corrs, id, rp);
    est.global = est.estimate.model;
    std::vector<Correspondence> inl;
    for (size_t i : est.estimate.inliers) inl.push_back(f.corrs[i]);
    std::optional<double> k_seed;
    if (const auto* m = std::get_if<RsDiffModel>(&est.global)) k_seed = m->k;
    try {
      est.global = FitLeastSquares(id, inl, rp.rs, rp.k_range, k_seed);
    } catch (const Error& e) {
      est.notes.push_back(std::string("refit skipped: ") + e.what());
    }
    est.warp = Warp(DiscreteHomography{});
    return 0;
  });
  nlohmann::json j = EstimateReport(est, f.corrs);
  j.erase("field");
  j["file"] = corr_path;
  if (!f.pair.empty()) j["pair"] = f.pair;
  j["seed"] = o.seed;
  PrintJson(j, out);
  return 0;
}

// ---- stitch ----
int CmdStitch(const std::string& img1_path, const std::string& img2_path,
              const std::string& corr_path, const CommonOpts& o, const std::string& mode_name,
              const std::string& blend_name, const std::string& out, const std::string& diff_out,
              const std::string& report_out) {
  const auto mode = ParseStitchMode(mode_name);
  if (!mode) throw StageError{"config", "unknown mode '" + mode_name + "'"};
  const auto blend = ParseBlendMode(blend_name);
  if (!blend) throw StageError{"config", "unknown blend '" + blend_name + "'"};
  const Raster img1 = Stage("load", [&] { return ReadPng(img1_path); });
  const Raster img2 = Stage("load", [&] { return ReadPng(img2_path); });
  const CorrespondenceFile f = Stage("load", [&] { return LoadCorrs(corr_path, o); });
  if (img1.width != f.width || img1.height != f.height) {
    throw StageError{"load", "image size differs from the correspondence header"};
  }
  PipelineConfig cfg;
  cfg.mode = *mode;
  cfg.blend = *blend;
  cfg.ransac = Stage("config", [&] { return MakeRansac(o, f.Rs()); });
  cfg.weights = Stage("config", [&] { return MakeWeights(o, f.width, f.height); });
  const StitchResult r = Stage("stitch", [&] { return RunStitch(img1, img2, f.corrs, cfg); });
  Stage("write", [&] {
    WritePng(r.canvas.image, out);
    if (!diff_out.empty()) WritePng(r.canvas.diff, diff_out);
    return 0;
  });
  PrintWarnings(r.canvas.warnings);
  nlohmann::json j = EstimateReport(r.estimate, f.corrs);
  j["mode"] = StitchModeName(*mode);
  j["canvas"] = CanvasMetadata(r.canvas);
  j["rmse_ncc"] = std::isfinite(r.rmse_ncc) ? nlohmann::json(r.rmse_ncc) : nlohmann::json(nullptr);
  PrintJson(j, report_out);
  return 0;
}

// ---- rectify ----
int CmdRectify(const std::string& img_path, const std::string& corr_path, const CommonOpts& o,
               const std::string& out, const std::string& mask_out, bool field) {
  const Raster img = Stage("load", [&] { return ReadPng(img_path); });
  const CorrespondenceFile f = Stage("load", [&] { return LoadCorrs(corr_path, o); });
  if (img.width != f.width || img.height != f.height) {
    throw StageError{"load", "image size differs from the correspondence header"};
  }
  if (f.gamma == 0.0) {
    std::cerr << "warning: gamma = 0: rectification is a no-op (beta1 = 0), output equals input\n";
  }
  PipelineConfig cfg;
  cfg.mode = field ? StitchMode::kRsApap : StitchMode::kRs;
  cfg.ransac = Stage("config", [&] { return MakeRansac(o, f.Rs()); });
  cfg.weights = Stage("config", [&] { return MakeWeights(o, f.width, f.height); });
  const EstimatedWarp est =
      Stage("estimate", [&] { return EstimateWarp(f.corrs, cfg, f.width, f.height); });
  const Canvas c = Stage("rectify", [&] { return RectifyImage(img, est.warp); });
  Stage("write", [&] {
    WritePng(c.image, out);
    if (!mask_out.empty()) WritePng(MaskImage(c.image), mask_out);
    return 0;
  });
  for (const std::string& w : c.warnings) {
    if (f.gamma != 0.0) std::cerr << "warning: " << w << "\n";
  }
  nlohmann::json j = EstimateReport(est, f.corrs);
  j["canvas"] = CanvasMetadata(c);
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---- bench ----
int CmdBench(const std::string& spec_path, const std::string& out, int threads) {
  if (threads > 0) setenv("RSSTITCH_THREADS", std::to_string(threads).c_str(), 1);
  const BenchSpec spec = Stage("spec", [&] { return ReadBenchSpec(spec_path); });
  const std::vector<SweepRow> rows = Stage("sweep", [&] { return RunSweep(spec.sweep); });
  const std::string csv = SweepCsv(rows);
  const auto checks = EvaluateChecks(spec.checks, rows);
  nlohmann::json meta = SweepMeta(spec.sweep);
  meta["spec_file"] = fs::path(spec_path).filename().string();
  meta["checks"] = CheckResultsJson(checks);
  Stage("write", [&] {
    if (out.empty() || out == "-") {
      std::cout << csv;
    } else {
      WriteTextFile(out, csv);
      WriteTextFile(out + ".meta.json", meta.dump(2) + "\n");
    }
    return 0;
  });
  bool ok = true;
  for (const CheckResult& c : checks) {
    std::cerr << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    ok = ok && c.pass;
  }
  return ok ? 0 : 3;
}

// ---- eval ----
int CmdEvalCdf(const std::vector<std::string>& files, const CommonOpts& o, int holdout,
               const std::string& out) {
  std::vector<double> medians;
  std::ostringstream rows;
  rows << "file,n,inliers,held_in_median,held_out_median\n";
  for (size_t i = 0; i < files.size(); ++i) {
    const CorrespondenceFile f = Stage("load", [&] { return LoadCorrs(files[i], o); });
    const SolverId id = ChooseSolver(o.solver, f);
    const HeldOutResult r = Stage("estimate", [&] {
      RansacParams rp = MakeRansac(o, f.Rs());
      rp.seed = TrialSeed(o.seed, i);
      if (holdout > 0) {
        return EvaluateHeldOut(f.corrs, id, rp, static_cast<size_t>(holdout),
                               TrialSeed(o.seed ^ 0x9e37, i));
      }
      HeldOutResult all;
      all.estimate = Ransac(f.corrs, id, rp);
      all.held_in_median = MedianOf(all.estimate.residuals);
      return all;
    });
    const double m = holdout > 0 ? r.held_out_median : r.held_in_median;
    medians.push_back(m);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.10g,%.10g\n", files[i].c_str(), f.corrs.size(),
                  r.estimate.inliers.size(), r.held_in_median,
                  holdout > 0 ? r.held_out_median : std::nan(""));
    rows << buf;
  }
  std::cerr << rows.str();
  std::ostringstream csv;
  csv << "median_px,fraction\n";
  for (const CdfPoint& p : EvalCdf(medians)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", p.value, p.fraction);
    csv << buf;
  }
  if (out.empty() || out == "-") std::cout << csv.str();
  else WriteTextFile(out, csv.str());
  return 0;
}

int CmdEvalNcc(const std::string& a_path, const std::string& b_path) {
  const Raster a = Stage("load", [&] { return ReadPng(a_path); });
  const Raster b = Stage("load", [&] { return ReadPng(b_path); });
  const double v = Stage("metric", [&] { return RmseNcc(a, b); });
  std::printf("%.10g\n", v);
  return 0;
}

// ---- synth ----
int CmdSynth(uint64_t seed, const SceneParams& sp, double gamma, double sigma_g,
             const std::string& dir, bool images) {
  fs::create_directories(dir);
  const CameraConfig cam = CameraConfig::WithGamma(gamma);
  const SyntheticScene scene = Stage("scene", [&] { return RandomScene(seed, sp, cam); });
  const GeneratedPair pair =
      Stage("generate", [&] { return GenCorrespondences(scene, sigma_g, TrialSeed(seed, 1), sp.mode); });
  CorrespondenceFile f;
  f.width = cam.width;
  f.height = cam.height;
  f.gamma = gamma;
  f.pair = "synth-" + std::to_string(seed);
  f.corrs = pair.noisy;
  Stage("write", [&] {
    WriteTextFile((fs::path(dir) / "corrs.txt").string(), FormatCorrespondences(f));
    nlohmann::json j = SceneToJson(scene);
    j["truth"] = ModelJson(pair.truth);
    WriteTextFile((fs::path(dir) / "scene.json").string(), j.dump(2) + "\n");
    if (images) {
      WritePng(RenderPlaneRs(scene, Frame::kFirst), (fs::path(dir) / "frame1.png").string());
      WritePng(RenderPlaneRs(scene, Frame::kSecond), (fs::path(dir) / "frame2.png").string());
    }
    return 0;
  });
  std::cout << ModelJson(pair.truth).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rolling-shutter aware homography estimation and stitching"};
  app.require_subcommand(1);
  CommonOpts o;

  std::string out, diff_out, report_out, mask_out, mode = "rs-apap", blend = "linear";
  std::string corr, img1, img2, spec_path;
  std::vector<std::string> files;
  int holdout = 0;
  bool field = false, no_images = false;

  auto* solve = app.add_subcommand("solve", "estimate a model from a correspondence file");
  solve->add_option("corrs", corr, "correspondence file")->required();
  solve->add_option("--solver", o.solver,
                    "auto, GS-disc, GS-5point, GS-diff, RS-ConstVel, RS-ConstAcc");
  solve->add_option("-o,--out", out, "report JSON (default stdout)");
  AddRansacFlags(solve, o);

  auto* stitch = app.add_subcommand("stitch", "stitch two images");
  stitch->add_option("img1", img1, "frame 1 PNG")->required();
  stitch->add_option("img2", img2, "frame 2 PNG")->required();
  stitch->add_option("corrs", corr, "correspondence file")->required();
  stitch->add_option("--mode", mode, "gs, apap, rs, rs-apap, rs-apap-rectify");
  stitch->add_option("--blend", blend, "linear, average, last");
  stitch->add_option("-o,--out", out, "canvas PNG")->required();
  stitch->add_option("--diff", diff_out, "overlap diagnostic PNG");
  stitch->add_option("--report", report_out, "report JSON (default stdout)");
  AddRansacFlags(stitch, o);
  AddFieldFlags(stitch, o);

  auto* rectify = app.add_subcommand("rectify", "undo rolling-shutter distortion of frame 1");
  rectify->add_option("img", img1, "frame PNG")->required();
  rectify->add_option("corrs", corr, "correspondences to the next frame")->required();
  rectify->add_option("-o,--out", out, "rectified PNG (alpha = coverage)")->required();
  rectify->add_option("--mask", mask_out, "coverage mask PNG");
  rectify->add_flag("--field", field, "use the spatially varying RS field");
  AddRansacFlags(rectify, o);
  AddFieldFlags(rectify, o);

  auto* bench = app.add_subcommand("bench", "run a synthetic sweep spec (TOML)");
  bench->add_option("spec", spec_path, "sweep spec")->required()->check(CLI::ExistingFile);
  bench->add_option("-o,--out", out, "CSV path (writes <out>.meta.json too)");
  bench->add_option("--threads", o.threads, "worker threads");

  auto* eval = app.add_subcommand("eval", "metrics");
  eval->require_subcommand(1);
  auto* cdf = eval->add_subcommand("cdf", "CDF of per-pair median residuals");
  cdf->add_option("files", files, "correspondence files")->required();
  cdf->add_option("--solver", o.solver, "solver (default auto)");
  cdf->add_option("--holdout", holdout, "reserve N correspondences per pair as test set");
  cdf->add_option("-o,--out", out, "CDF CSV (default stdout)");
  AddRansacFlags(cdf, o);
  auto* ncc = eval->add_subcommand("ncc", "rmse of 1 - NCC between two aligned images");
  ncc->add_option("a", img1, "image A")->required();
  ncc->add_option("b", img2, "image B")->required();

  uint64_t synth_seed = 1;
  SceneParams sp;
  double synth_gamma = 1.0, sigma_g = 0.0;
  std::string gen = "exact";
  auto* synth = app.add_subcommand("synth", "generate a synthetic pair");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--omega", sp.omega_deg, "rotation magnitude in degrees");
  synth->add_option("--v", sp.v, "translation magnitude (mean depth 1)");
  synth->add_option("--k", sp.k, "acceleration parameter");
  synth->add_option("--points", sp.num_points);
  synth->add_option("--gamma", synth_gamma)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--sigma-g", sigma_g, "pixel noise std");
  synth->add_option("--generator", gen, "exact or first-order");
  synth->add_flag("--no-images", no_images, "skip rendering frames");
  synth->add_option("-o,--out-dir", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (o.threads > 0) setenv("RSSTITCH_THREADS", std::to_string(o.threads).c_str(), 1);

  try {
    if (*solve) return CmdSolve(corr, o, out);
    if (*stitch) {
      return CmdStitch(img1, img2, corr, o, mode, blend, out, diff_out, report_out);
    }
    if (*rectify) return CmdRectify(img1, corr, o, out, mask_out, field);
    if (*bench) return CmdBench(spec_path, out, o.threads);
    if (*cdf) return CmdEvalCdf(files, o, holdout, out);
    if (*ncc) return CmdEvalNcc(img1, img2);
    if (*synth) {
      if (gen == "first-order") sp.mode = GenMode::kFirstOrder;
      else if (gen != "exact") throw StageError{"config", "generator must be exact or first-order"};
      return CmdSynth(synth_seed, sp, synth_gamma, sigma_g, out, !no_images);
    }
  } catch (const StageError& e) {
    std::cerr << "rsstitch: " << e.stage << ": " << e.message << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "rsstitch: " << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
