#include "rsstitch/synthbench.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <thread>

#include <Eigen/Geometry>
#include <boost/math/tools/toms748_solve.hpp>

namespace rsstitch {

double CameraConfig::Focal() const {
  return width / (2.0 * std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0));
}

Matrix3 CameraConfig::K() const {
  Matrix3 K = Matrix3::Identity();
  K(0, 0) = K(1, 1) = Focal();
  K(0, 2) = 0.5 * (width - 1);
  K(1, 2) = 0.5 * (height - 1);
  return K;
}

void CameraConfig::Validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kParameterDomain, "camera dimensions must be positive");
  }
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw Error(ErrorCode::kParameterDomain, "field of view must lie in (0, 180) deg");
  }
  rs.Validate();
}

CameraConfig CameraConfig::WithGamma(double gamma) {
  CameraConfig c;
  c.rs.gamma = gamma;
  return c;
}

Matrix3 ExpSo3(const Vector3& w) {
  const double theta = w.norm();
  const Matrix3 W = Skew(w);
  if (theta < 1e-10) return Matrix3::Identity() + W + 0.5 * W * W;
  return Matrix3::Identity() + (std::sin(theta) / theta) * W +
         ((1.0 - std::cos(theta)) / (theta * theta)) * W * W;
}

namespace {

double FrameBeta(const MotionSpec& m, Frame f, const RsParams& rs, double y) {
  return f == Frame::kFirst ? Beta1(m.k, y, rs) : Beta2(m.k, y, rs);
}

// Camera-frame coordinates of X from the scanline-y pose.
Vector3 CameraPoint(const Vector3& X, const MotionSpec& m, Frame f, const RsParams& rs,
                    double y) {
  const double b = FrameBeta(m, f, rs, y);
  return ExpSo3(b * m.omega).transpose() * (X - b * m.v);
}

bool Inside(const Pixel& p, const CameraConfig& cam) {
  return p.x() >= 0.0 && p.x() <= cam.width - 1.0 && p.y() >= 0.0 &&
         p.y() <= cam.height - 1.0;
}

}  // namespace

double ScanlineEquationResidual(const Vector3& X, const MotionSpec& motion, Frame frame,
                                const CameraConfig& camera, double y) {
  const Vector3 Xc = CameraPoint(X, motion, frame, camera.rs, y);
  if (!(Xc.z() > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return camera.Focal() * Xc.y() / Xc.z() + 0.5 * (camera.height - 1) - y;
}

std::optional<Projection> ProjectRs(const Vector3& X, const MotionSpec& motion,
                                    Frame frame, const CameraConfig& camera) {
  const double h = camera.rs.height;
  auto g = [&](double y) { return ScanlineEquationResidual(X, motion, frame, camera, y); };
  constexpr int kSamples = 64;
  std::vector<double> ys(kSamples + 1), gs(kSamples + 1);
  for (int i = 0; i <= kSamples; ++i) {
    ys[i] = h * i / kSamples;
    gs[i] = g(ys[i]);
    if (std::isnan(gs[i])) return std::nullopt;
  }
  std::vector<double> roots;
  for (int i = 0; i <= kSamples; ++i) {
    if (gs[i] == 0.0) {
      roots.push_back(ys[i]);
      continue;
    }
    if (i < kSamples && gs[i + 1] != 0.0 && (gs[i] < 0.0) != (gs[i + 1] < 0.0)) {
      boost::uintmax_t iters = 200;
      const auto bracket = boost::math::tools::toms748_solve(
          g, ys[i], ys[i + 1], gs[i], gs[i + 1],
          boost::math::tools::eps_tolerance<double>(52), iters);
      const double a = bracket.first, b = bracket.second;
      roots.push_back(std::abs(g(a)) <= std::abs(g(b)) ? a : b);
    }
  }
  if (roots.empty()) return std::nullopt;
  Projection out;
  double y = roots.front();
  if (roots.size() > 1) {
    out.multiple_roots = true;
    const double b0 = FrameBeta(motion, frame, camera.rs, 0.0);
    const Vector3 Xc = ExpSo3(b0 * motion.omega).transpose() * (X - b0 * motion.v);
    const double y_gs = camera.Focal() * Xc.y() / Xc.z() + 0.5 * (camera.height - 1);
    for (double r : roots) {
      if (std::abs(r - y_gs) < std::abs(y - y_gs)) y = r;
    }
  }
  const Vector3 Xc = CameraPoint(X, motion, frame, camera.rs, y);
  out.p = Pixel(camera.Focal() * Xc.x() / Xc.z() + 0.5 * (camera.width - 1), y);
  return out;
}

SceneDraw DrawScene(uint64_t seed, uint64_t config_index, const CameraConfig& camera) {
  std::mt19937_64 rng(TrialSeed(seed, config_index));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  const Matrix3 Kinv = camera.K().inverse();
  SceneDraw d;
  // Uniform on the 60 deg cap; rejected if the plane is too oblique to some
  // (slightly enlarged) image corner.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double cos_t = 0.5 + 0.5 * U(rng);
    const double phi = 2.0 * std::numbers::pi * U(rng);
    const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
    d.normal = Vector3(sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t);
    double worst = 1.0;
    for (double cx : {-0.1, 1.1}) {
      for (double cy : {-0.1, 1.1}) {
        const Vector3 r =
            (Kinv * Vector3(cx * (camera.width - 1), cy * (camera.height - 1), 1.0)).normalized();
        worst = std::min(worst, d.normal.dot(r));
      }
    }
    if (worst >= 0.2) break;
  }
  d.omega_dir = Vector3(N(rng), N(rng), N(rng)).normalized();
  d.v_dir = Vector3(N(rng), N(rng), N(rng)).normalized();
  d.point_seed = rng();
  return d;
}

Matrix3 GroundTruthH(const SyntheticScene& s) {
  const Matrix3 K = s.camera.K();
  const Matrix3 Hn = -(Skew(s.motion.omega) + s.motion.v * s.plane.n.transpose() / s.plane.d);
  return K * Hn * K.inverse();
}

RsDiffModel GroundTruthModel(const SyntheticScene& s) {
  return {GroundTruthH(s), s.motion.k, s.camera.rs};
}

namespace {

std::optional<Correspondence> ProjectPair(const SyntheticScene& s, const RsDiffModel& truth,
                                          const Vector3& X, GenMode mode, bool* multiple) {
  const auto p1 = ProjectRs(X, s.motion, Frame::kFirst, s.camera);
  if (!p1 || !Inside(p1->p, s.camera)) return std::nullopt;
  Pixel p2;
  bool multi = p1->multiple_roots;
  if (mode == GenMode::kExact) {
    const auto q = ProjectRs(X, s.motion, Frame::kSecond, s.camera);
    if (!q) return std::nullopt;
    p2 = q->p;
    multi = multi || q->multiple_roots;
  } else {
    const auto q = ForwardMapRs(truth, p1->p);
    if (!q) return std::nullopt;
    p2 = *q;
  }
  if (!Inside(p2, s.camera)) return std::nullopt;
  if (multiple) *multiple = multi;
  return Correspondence::FromPoints(p1->p, p2);
}

}  // namespace

SyntheticScene MakeScene(const SceneDraw& draw, const SceneParams& params,
                         const CameraConfig& camera) {
  camera.Validate();
  if (params.num_points < 1) {
    throw Error(ErrorCode::kParameterDomain, "scene needs at least one point");
  }
  SyntheticScene s;
  s.camera = camera;
  s.seed = draw.point_seed;
  s.motion.omega = params.omega_deg * std::numbers::pi / 180.0 * draw.omega_dir;
  s.motion.v = params.v * draw.v_dir;
  s.motion.k = params.k;
  s.plane.n = draw.normal;

  const Matrix3 Kinv = camera.K().inverse();
  double inv_depth = 0.0;
  int n = 0;
  for (int i = 0; i <= 16; ++i) {
    for (int j = 0; j <= 8; ++j) {
      const Vector3 r = Kinv * Vector3(i / 16.0 * (camera.width - 1),
                                       j / 8.0 * (camera.height - 1), 1.0);
      inv_depth += 1.0 / s.plane.n.dot(r);
      ++n;
    }
  }
  s.plane.d = n / inv_depth;

  const RsDiffModel truth = GroundTruthModel(s);
  std::mt19937_64 rng(draw.point_seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int max_attempts = 200 * params.num_points;
  for (int attempt = 0;
       attempt < max_attempts && static_cast<int>(s.points.size()) < params.num_points;
       ++attempt) {
    const Vector3 r = Kinv * Vector3(U(rng) * (camera.width - 1),
                                     U(rng) * (camera.height - 1), 1.0);
    const Vector3 X = r * (s.plane.d / s.plane.n.dot(r));
    if (ProjectPair(s, truth, X, params.mode, nullptr)) s.points.push_back(X);
  }
  if (static_cast<int>(s.points.size()) < params.num_points) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "could not place enough points visible in both frames");
  }
  return s;
}

SyntheticScene RandomScene(uint64_t seed, const SceneParams& params,
                           const CameraConfig& camera) {
  return MakeScene(DrawScene(seed, 0, camera), params, camera);
}

GeneratedPair GenCorrespondences(const SyntheticScene& s, double sigma_g,
                                 uint64_t noise_seed, GenMode mode) {
  if (!(sigma_g >= 0.0)) {
    throw Error(ErrorCode::kParameterDomain, "noise sigma must be >= 0");
  }
  GeneratedPair out;
  out.truth = GroundTruthModel(s);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> N(0.0, 1.0);
  for (const Vector3& X : s.points) {
    bool multi = false;
    const auto c = ProjectPair(s, out.truth, X, mode, &multi);
    if (!c) {
      ++out.dropped_points;
      continue;
    }
    out.multiple_root_points += multi ? 1 : 0;
    out.clean.push_back(*c);
    Pixel p1 = c->p1, p2 = c->p2();
    if (sigma_g > 0.0) {
      p1 += sigma_g * Pixel(N(rng), N(rng));
      p2 += sigma_g * Pixel(N(rng), N(rng));
    }
    out.noisy.push_back(Correspondence::FromPoints(p1, p2));
  }
  if (out.clean.size() < 5) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "fewer than 5 scene points visible in both frames");
  }
  return out;
}

namespace {

nlohmann::json Vec(const Vector3& v) { return {v.x(), v.y(), v.z()}; }

Vector3 VecFrom(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kSchema, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json SceneToJson(const SyntheticScene& s) {
  nlohmann::json j;
  j["camera"] = {{"width", s.camera.width},
                 {"height", s.camera.height},
                 {"hfov_deg", s.camera.hfov_deg},
                 {"gamma", s.camera.rs.gamma},
                 {"h", s.camera.rs.height}};
  j["motion"] = {{"omega", Vec(s.motion.omega)}, {"v", Vec(s.motion.v)}, {"k", s.motion.k}};
  j["plane"] = {{"n", Vec(s.plane.n)}, {"d", s.plane.d}};
  nlohmann::json pts = nlohmann::json::array();
  for (const Vector3& X : s.points) pts.push_back(Vec(X));
  j["points"] = std::move(pts);
  j["seed"] = s.seed;
  return j;
}

SyntheticScene SceneFromJson(const nlohmann::json& j) {
  try {
    SyntheticScene s;
    const auto& c = j.at("camera");
    s.camera.width = c.at("width").get<int>();
    s.camera.height = c.at("height").get<int>();
    s.camera.hfov_deg = c.at("hfov_deg").get<double>();
    s.camera.rs.gamma = c.at("gamma").get<double>();
    s.camera.rs.height = c.at("h").get<double>();
    s.camera.Validate();
    s.motion.omega = VecFrom(j.at("motion").at("omega"));
    s.motion.v = VecFrom(j.at("motion").at("v"));
    s.motion.k = j.at("motion").at("k").get<double>();
    s.plane.n = VecFrom(j.at("plane").at("n"));
    s.plane.d = j.at("plane").at("d").get<double>();
    for (const auto& p : j.at("points")) s.points.push_back(VecFrom(p));
    s.seed = j.value("seed", uint64_t{0});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("scene JSON: ") + e.what());
  }
}

// ---- sweeps ----

std::string SweepParamName(SweepParam p) {
  switch (p) {
    case SweepParam::kGamma:
      return "gamma";
    case SweepParam::kOmega:
      return "omega";
    case SweepParam::kV:
      return "v";
    case SweepParam::kK:
      return "k";
  }
  return "unknown";
}

std::optional<SweepParam> ParseSweepParam(const std::string& name) {
  if (name == "gamma") return SweepParam::kGamma;
  if (name == "omega") return SweepParam::kOmega;
  if (name == "v") return SweepParam::kV;
  if (name == "k") return SweepParam::kK;
  return std::nullopt;
}

std::optional<SweepSolver> ParseSweepSolver(const std::string& name) {
  std::string key;
  for (char ch : name) {
    if (ch != '-' && ch != '_') {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (key == "gsmoretrials") return SweepSolver{"GS-MoreTrials", SolverId::kGsDiscrete, 1.25};
  const auto id = ParseSolverId(name);
  if (!id) return std::nullopt;
  return SweepSolver{SolverName(*id), *id, 1.0};
}

void SweepSpec::Validate() const {
  if (values.empty()) throw Error(ErrorCode::kSchema, "sweep needs at least one value");
  if (solvers.empty()) throw Error(ErrorCode::kSchema, "sweep needs at least one solver");
  if (configs < 1) throw Error(ErrorCode::kSchema, "configs must be >= 1");
  if (points < 5) throw Error(ErrorCode::kSchema, "points must be >= 5");
  if (!(sigma_g >= 0.0)) throw Error(ErrorCode::kSchema, "sigma_g must be >= 0");
  if (ransac_trials < 1) throw Error(ErrorCode::kSchema, "ransac_trials must be >= 1");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kSchema, "sweep values must be finite");
    if (param == SweepParam::kGamma && (v < 0.0 || v > 1.0)) {
      throw Error(ErrorCode::kSchema, "gamma values must lie in [0, 1]");
    }
    if (param == SweepParam::kK && !(v > -2.0)) {
      throw Error(ErrorCode::kSchema, "k values must be > -2");
    }
    if ((param == SweepParam::kOmega || param == SweepParam::kV) && v < 0.0) {
      throw Error(ErrorCode::kSchema, "motion magnitudes must be >= 0");
    }
  }
  if (gamma < 0.0 || gamma > 1.0) throw Error(ErrorCode::kSchema, "gamma must lie in [0, 1]");
  k_range.Validate();
}

Estimation SweepSpec::ResolvedEstimation() const {
  if (estimation != Estimation::kAuto) return estimation;
  return sigma_g > 0.0 ? Estimation::kRansac : Estimation::kLeastSquares;
}

double SweepSpec::ResolvedThreshold() const {
  return threshold > 0.0 ? threshold : std::max(1.0, 3.0 * sigma_g);
}

std::optional<double> MeanReprojectionError(const Model& model,
                                            std::span<const Correspondence> clean) {
  if (clean.empty()) return std::nullopt;
  double sum = 0.0;
  for (const Correspondence& c : clean) {
    double e;
    if (const auto* d = std::get_if<DiscreteHomography>(&model)) {
      e = ResidualGsDisc(d->H, c);
    } else {
      const auto p2 = ForwardMapRs(std::get<RsDiffModel>(model), c.p1);
      if (!p2) return std::nullopt;
      e = (*p2 - c.p2()).norm();
    }
    if (!std::isfinite(e)) return std::nullopt;
    sum += e;
  }
  return sum / clean.size();
}

Model EstimateForSweep(const SweepSpec& spec, const SweepSolver& solver,
                       std::span<const Correspondence> corrs, const RsParams& rs,
                       uint64_t seed) {
  if (spec.ResolvedEstimation() == Estimation::kLeastSquares) {
    return FitLeastSquares(solver.id, corrs, rs, spec.k_range);
  }
  RansacParams params;
  params.trials = std::max(1, static_cast<int>(std::lround(spec.ransac_trials * solver.trial_factor)));
  params.threshold = spec.ResolvedThreshold();
  params.seed = seed;
  params.k_range = spec.k_range;
  params.rs = rs;
  params.threads = 1;
  const RobustEstimate est = Ransac(corrs, solver.id, params);
  std::vector<Correspondence> inliers;
  for (size_t i : est.inliers) inliers.push_back(corrs[i]);
  std::optional<double> k_seed;
  if (const auto* m = std::get_if<RsDiffModel>(&est.model)) k_seed = m->k;
  try {
    return FitLeastSquares(solver.id, inliers, rs, spec.k_range, k_seed);
  } catch (const Error&) {
    return est.model;
  }
}

std::vector<SweepRow> RunSweep(const SweepSpec& spec) {
  spec.Validate();
  const size_t ns = spec.solvers.size();
  const size_t nv = spec.values.size();
  // errors[v][s][c]; NaN marks a failure.
  std::vector<std::vector<std::vector<double>>> errors(
      nv, std::vector<std::vector<double>>(ns, std::vector<double>(spec.configs)));

  CameraConfig base;
  base.width = spec.width;
  base.height = spec.height;
  base.hfov_deg = spec.hfov_deg;
  base.rs = RsParams{spec.gamma, static_cast<double>(spec.height)};

  auto run_config = [&](int cfg) {
    const SceneDraw draw = DrawScene(spec.seed, static_cast<uint64_t>(cfg), base);
    for (size_t vi = 0; vi < nv; ++vi) {
      CameraConfig cam = base;
      SceneParams sp;
      sp.omega_deg = spec.omega_deg;
      sp.v = spec.v;
      sp.k = spec.k;
      sp.num_points = spec.points;
      sp.mode = spec.generator;
      const double value = spec.values[vi];
      switch (spec.param) {
        case SweepParam::kGamma:
          cam.rs.gamma = value;
          break;
        case SweepParam::kOmega:
          sp.omega_deg = value;
          break;
        case SweepParam::kV:
          sp.v = value;
          break;
        case SweepParam::kK:
          sp.k = value;
          break;
      }
      GeneratedPair pair;
      bool ok = true;
      try {
        const SyntheticScene scene = MakeScene(draw, sp, cam);
        pair = GenCorrespondences(scene, spec.sigma_g,
                                  TrialSeed(TrialSeed(spec.seed, cfg), 7919 + vi),
                                  spec.generator);
      } catch (const Error&) {
        ok = false;
      }
      for (size_t si = 0; si < ns; ++si) {
        double err = std::numeric_limits<double>::quiet_NaN();
        if (ok) {
          try {
            const Model m = EstimateForSweep(
                spec, spec.solvers[si], pair.noisy, cam.rs,
                TrialSeed(spec.seed ^ 0x5bd1e995ULL, (static_cast<uint64_t>(cfg) * nv + vi) * ns + si));
            if (const auto e = MeanReprojectionError(m, pair.clean)) err = *e;
          } catch (const Error&) {
          }
        }
        errors[vi][si][cfg] = err;
      }
    }
  };

  const int threads = std::clamp(DefaultThreadCount(), 1, spec.configs);
  if (threads == 1) {
    for (int c = 0; c < spec.configs; ++c) run_config(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int c = t; c < spec.configs; c += threads) run_config(c);
      });
    }
    for (std::thread& th : pool) th.join();
  }

  std::vector<SweepRow> rows;
  for (size_t vi = 0; vi < nv; ++vi) {
    for (size_t si = 0; si < ns; ++si) {
      SweepRow row;
      row.param = spec.param;
      row.value = spec.values[vi];
      row.solver = spec.solvers[si].name;
      row.sigma_g = spec.sigma_g;
      double sum = 0.0, sum2 = 0.0;
      for (double e : errors[vi][si]) {
        if (std::isnan(e)) {
          ++row.failures;
          continue;
        }
        ++row.n_configs;
        sum += e;
      }
      if (row.n_configs == 0) {
        row.mean_err = row.std_err = std::numeric_limits<double>::quiet_NaN();
      } else {
        row.mean_err = sum / row.n_configs;
        for (double e : errors[vi][si]) {
          if (!std::isnan(e)) sum2 += (e - row.mean_err) * (e - row.mean_err);
        }
        row.std_err = row.n_configs > 1 ? std::sqrt(sum2 / (row.n_configs - 1)) : 0.0;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string SweepCsv(std::span<const SweepRow> rows) {
  std::string out = "sweep_param,sweep_value,solver,sigma_g,mean_err_px,std_err_px,n_configs,failures\n";
  for (const SweepRow& r : rows) {
    out += SweepParamName(r.param) + "," + Num(r.value) + "," + r.solver + "," +
           Num(r.sigma_g) + "," + Num(r.mean_err) + "," + Num(r.std_err) + "," +
           std::to_string(r.n_configs) + "," + std::to_string(r.failures) + "\n";
  }
  return out;
}

nlohmann::json SweepMeta(const SweepSpec& spec) {
  nlohmann::json j;
  j["sweep_param"] = SweepParamName(spec.param);
  j["values"] = spec.values;
  j["fixed"] = {{"gamma", spec.gamma}, {"omega_deg", spec.omega_deg}, {"v", spec.v}, {"k", spec.k}};
  j["sigma_g"] = spec.sigma_g;
  j["configs"] = spec.configs;
  j["points"] = spec.points;
  j["seed"] = spec.seed;
  j["generator"] = spec.generator == GenMode::kExact ? "exact" : "first-order";
  const bool ls = spec.ResolvedEstimation() == Estimation::kLeastSquares;
  j["estimation"] = ls ? "least-squares-all-points" : "ransac+inlier-refit";
  if (!ls) {
    j["ransac_trials"] = spec.ransac_trials;
    j["threshold_px"] = spec.ResolvedThreshold();
  }
  j["k_range"] = {spec.k_range.lo, spec.k_range.hi};
  nlohmann::json solvers = nlohmann::json::array();
  for (const SweepSolver& s : spec.solvers) solvers.push_back(s.name);
  j["solvers"] = std::move(solvers);
  j["camera"] = {{"width", spec.width}, {"height", spec.height}, {"hfov_deg", spec.hfov_deg}};
  return j;
}

// ---- CDF / held-out ----

std::vector<CdfPoint> EvalCdf(std::span<const double> medians) {
  if (medians.empty()) throw Error(ErrorCode::kParameterDomain, "CDF needs at least one value");
  std::vector<double> v(medians.begin(), medians.end());
  std::sort(v.begin(), v.end());
  std::vector<CdfPoint> cdf;
  for (size_t i = 0; i < v.size(); ++i) {
    cdf.push_back({v[i], static_cast<double>(i + 1) / v.size()});
  }
  return cdf;
}

double CdfAt(std::span<const CdfPoint> cdf, double x) {
  double f = 0.0;
  for (const CdfPoint& p : cdf) {
    if (p.value <= x) f = p.fraction;
  }
  return f;
}

double MedianOf(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kParameterDomain, "median of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

HeldOutResult EvaluateHeldOut(std::span<const Correspondence> corrs, SolverId id,
                              RansacParams params, size_t n_test, uint64_t seed) {
  if (n_test == 0 || n_test >= corrs.size()) {
    throw Error(ErrorCode::kParameterDomain, "test set must be a strict, non-empty subset");
  }
  std::vector<size_t> idx(corrs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  HeldOutResult out;
  out.test_indices.assign(idx.begin(), idx.begin() + n_test);
  std::sort(out.test_indices.begin(), out.test_indices.end());
  params.holdout = out.test_indices;
  out.estimate = Ransac(corrs, id, params);
  std::vector<bool> test(corrs.size(), false);
  for (size_t i : out.test_indices) test[i] = true;
  std::vector<double> in, held;
  for (size_t i = 0; i < corrs.size(); ++i) {
    (test[i] ? held : in).push_back(out.estimate.residuals[i]);
  }
  out.held_in_median = MedianOf(in);
  out.held_out_median = MedianOf(held);
  return out;
}

// ---- stitching metric ----

double RmseNcc(const Raster& a_in, const Raster& b_in, std::span<const uint8_t> overlap) {
  if (a_in.width != b_in.width || a_in.height != b_in.height) {
    throw Error(ErrorCode::kParameterDomain, "images must have the same size");
  }
  const Raster a = ToGray(a_in);
  const Raster b = ToGray(b_in);
  const int w = a.width, h = a.height;
  const size_t npix = static_cast<size_t>(w) * h;
  if (!overlap.empty() && overlap.size() != npix) {
    throw Error(ErrorCode::kParameterDomain, "overlap mask size mismatch");
  }
  auto in = [&](int x, int y) {
    const size_t i = static_cast<size_t>(y) * w + x;
    if (!overlap.empty()) return overlap[i] != 0;
    return a.Valid(x, y) && b.Valid(x, y);
  };
  double sum = 0.0;
  size_t n = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      bool ok = true;
      double ma = 0.0, mb = 0.0;
      for (int dy = -1; dy <= 1 && ok; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!in(x + dx, y + dy)) {
            ok = false;
            break;
          }
          ma += a.at(x + dx, y + dy);
          mb += b.at(x + dx, y + dy);
        }
      }
      if (!ok) continue;
      ma /= 9.0;
      mb /= 9.0;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double da = a.at(x + dx, y + dy) - ma;
          const double db = b.at(x + dx, y + dy) - mb;
          sab += da * db;
          saa += da * da;
          sbb += db * db;
        }
      }
      double ncc;
      const bool ca = saa <= 1e-12, cb = sbb <= 1e-12;
      if (ca && cb) {
        ncc = 1.0;
      } else if (ca || cb) {
        continue;
      } else {
        ncc = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
      }
      sum += (1.0 - ncc) * (1.0 - ncc);
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::kUndefinedMetric, "empty overlap: no 3x3 window qualifies");
  return std::sqrt(sum / n);
}

// ---- procedural imagery ----

Raster RenderPlaneRs(const SyntheticScene& s, Frame frame, const TextureSpec& tex, int ss) {
  s.camera.Validate();
  if (ss < 1) throw Error(ErrorCode::kParameterDomain, "supersampling must be >= 1");
  const Vector3 n = s.plane.n.normalized();
  const Vector3 e1 =
      n.cross(std::abs(n.y()) < 0.9 ? Vector3::UnitY() : Vector3::UnitX()).normalized();
  const Vector3 e2 = n.cross(e1);

  struct Wave {
    double fx, fy, phase;
  };
  std::vector<Wave> waves;
  std::mt19937_64 rng(tex.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < tex.waves; ++i) {
    const double ang = 2.0 * std::numbers::pi * U(rng);
    const double f = 2.0 * std::numbers::pi * (0.3 + 1.7 * U(rng)) / tex.period;
    waves.push_back({f * std::cos(ang), f * std::sin(ang), 2.0 * std::numbers::pi * U(rng)});
  }
  const double wave_norm = tex.waves > 0 ? std::sqrt(2.0 / tex.waves) : 0.0;
  auto texture = [&](double u, double v) {
    const long cu = static_cast<long>(std::floor(u / tex.period));
    const long cv = static_cast<long>(std::floor(v / tex.period));
    const double checker = ((cu + cv) & 1) ? 1.0 : -1.0;
    double noise = 0.0;
    for (const Wave& w : waves) noise += std::sin(w.fx * u + w.fy * v + w.phase);
    return std::clamp(128.0 + 45.0 * checker + 40.0 * wave_norm * noise, 0.0, 255.0);
  };

  const CameraConfig& cam = s.camera;
  const Matrix3 Kinv = cam.K().inverse();
  Raster out(cam.width, cam.height, 1);
  out.mask.assign(static_cast<size_t>(cam.width) * cam.height, 255);
  auto rows = [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      std::vector<Matrix3> R(ss);
      std::vector<Vector3> c(ss);
      std::vector<double> ys(ss);
      for (int j = 0; j < ss; ++j) {
        ys[j] = y + (j + 0.5) / ss - 0.5;
        const double b = FrameBeta(s.motion, frame, cam.rs, ys[j]);
        R[j] = ExpSo3(b * s.motion.omega);
        c[j] = b * s.motion.v;
      }
      for (int x = 0; x < cam.width; ++x) {
        double acc = 0.0;
        bool hit = true;
        for (int j = 0; j < ss && hit; ++j) {
          for (int i = 0; i < ss; ++i) {
            const double xs = x + (i + 0.5) / ss - 0.5;
            const Vector3 dir = R[j] * (Kinv * Vector3(xs, ys[j], 1.0));
            const double denom = n.dot(dir);
            const double t = (s.plane.d - n.dot(c[j])) / denom;
            if (!(denom > 0.0) || !(t > 0.0)) {
              hit = false;
              break;
            }
            const Vector3 X = c[j] + t * dir;
            acc += texture(e1.dot(X), e2.dot(X));
          }
        }
        const size_t idx = static_cast<size_t>(y) * cam.width + x;
        if (!hit) {
          out.mask[idx] = 0;
          continue;
        }
        out.data[idx] = static_cast<uint8_t>(std::lround(acc / (ss * ss)));
      }
    }
  };
  const int threads = std::clamp(DefaultThreadCount(), 1, cam.height);
  if (threads == 1) {
    rows(0, cam.height);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(rows, cam.height * t / threads, cam.height * (t + 1) / threads);
    }
    for (std::thread& th : pool) th.join();
  }
  return out;
}

}  // namespace rsstitch
