#include "rsstitch/render.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <thread>

namespace rsstitch {

namespace {

// beta(y) = b0 + b1 y + b2 y^2 for one frame.
struct BetaPoly {
  double b0, b1, b2;

  double Derivative(double y) const { return b1 + 2.0 * b2 * y; }
};

BetaPoly BetaOf(const RsDiffModel& m, Frame frame) {
  if (!(m.k > -2.0)) {
    throw Error(ErrorCode::kParameterDomain, "k must be > -2");
  }
  const double c = 2.0 / (2.0 + m.k);
  const double s = m.rs.gamma / m.rs.height;
  if (frame == Frame::kFirst) return {0.0, c * s, 0.5 * c * m.k * s * s};
  return {1.0, c * s * (1.0 + m.k), 0.5 * c * m.k * s * s};
}

double BetaAt(const RsDiffModel& m, Frame frame, double y) {
  return frame == Frame::kFirst ? Beta1(m.k, y, m.rs) : Beta2(m.k, y, m.rs);
}

// Real root of a y^2 + b y + c nearest `target` within [lo, hi].
std::optional<double> NearestRoot(double a, double b, double c, double target,
                                  double lo, double hi) {
  std::optional<double> best;
  auto consider = [&](double r) {
    if (!std::isfinite(r) || r < lo || r > hi) return;
    if (!best || std::abs(r - target) < std::abs(*best - target)) best = r;
  };
  if (a == 0.0) {
    if (b != 0.0) consider(-c / b);
    return best;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  if (q == 0.0) {
    consider(0.0);
  } else {
    consider(q / a);
    consider(c / q);
  }
  return best;
}

std::optional<Pixel> Dehomogenize(const Matrix3& H, const Pixel& p) {
  const Vector3 x = H * Vector3(p.x(), p.y(), 1.0);
  if (!(std::abs(x.z()) > 1e-14 * H.cwiseAbs().maxCoeff()) || !x.allFinite()) {
    return std::nullopt;
  }
  return Pixel(x.x() / x.z(), x.y() / x.z());
}

std::optional<Pixel> InverseMapRs(const RsDiffModel& m, const Pixel& q) {
  Pixel p = q - FlowGs(m.H, q);
  for (int it = 0; it < 40; ++it) {
    const auto fwd = ForwardMapRs(m, p);
    const auto J = ForwardMapRsJacobian(m, p);
    if (!fwd || !J) return std::nullopt;
    const Pixel r = *fwd - q;
    if (r.norm() <= 1e-10 * (1.0 + q.norm())) return p;
    const double det = J->determinant();
    if (!(std::abs(det) > 1e-12)) return std::nullopt;
    const Pixel step = J->inverse() * r;
    p -= step;
    if (!p.allFinite()) return std::nullopt;
    if (step.norm() < 1e-12 * (1.0 + p.norm())) break;
  }
  const auto fwd = ForwardMapRs(m, p);
  if (fwd && (*fwd - q).norm() <= 1e-7) return p;
  return std::nullopt;
}

Model CellModelAt(const WarpField& f, const Pixel& p) { return f.ModelAt(p); }

std::optional<Pixel> ForwardModel(const Model& m, const Pixel& p) {
  if (const auto* d = std::get_if<DiscreteHomography>(&m)) return Dehomogenize(d->H, p);
  return ForwardMapRs(std::get<RsDiffModel>(m), p);
}

std::optional<Pixel> InverseModel(const Model& m, const Pixel& q) {
  if (const auto* d = std::get_if<DiscreteHomography>(&m)) {
    if (!(std::abs(d->H.determinant()) > 0.0)) return std::nullopt;
    return Dehomogenize(d->H.inverse(), q);
  }
  return InverseMapRs(std::get<RsDiffModel>(m), q);
}

}  // namespace

std::optional<Pixel> ForwardMapRs(const RsDiffModel& m, const Pixel& p1) {
  const BetaPoly b2 = BetaOf(m, Frame::kSecond);
  const Flow f = FlowGs(m.H, p1);
  const double beta1 = Beta1(m.k, p1.y(), m.rs);
  // y2 - y1 - (beta2(y2) - beta1) f_y = 0
  const double a = -f.y() * b2.b2;
  const double b = 1.0 - f.y() * b2.b1;
  const double c = -p1.y() - f.y() * (b2.b0 - beta1);
  const double h = m.rs.height;
  const auto y2 = NearestRoot(a, b, c, p1.y() + f.y(), -0.5 * h, 1.5 * h);
  if (!y2) return std::nullopt;
  const double beta = Beta2(m.k, *y2, m.rs) - beta1;
  return Pixel(p1.x() + beta * f.x(), *y2);
}

std::optional<Eigen::Matrix2d> ForwardMapRsJacobian(const RsDiffModel& m,
                                                    const Pixel& p1) {
  const auto p2 = ForwardMapRs(m, p1);
  if (!p2) return std::nullopt;
  const BetaPoly b1 = BetaOf(m, Frame::kFirst);
  const BetaPoly b2 = BetaOf(m, Frame::kSecond);
  const Flow f = FlowGs(m.H, p1);
  const Eigen::Matrix2d Jf = FlowGsJacobian(m.H, p1);
  const double y1 = p1.y();
  const double y2 = p2->y();
  const double beta = Beta2(m.k, y2, m.rs) - Beta1(m.k, y1, m.rs);
  const double d1 = b1.Derivative(y1);
  const double d2 = b2.Derivative(y2);
  const double dG_dy2 = 1.0 - d2 * f.y();
  if (dG_dy2 == 0.0) return std::nullopt;
  Eigen::RowVector2d dG_dp = -beta * Jf.row(1);
  dG_dp(1) += d1 * f.y() - 1.0;
  const Eigen::RowVector2d dy2 = -dG_dp / dG_dy2;
  Eigen::RowVector2d dbeta = d2 * dy2;
  dbeta(1) -= d1;
  Eigen::Matrix2d J;
  J.row(0) = f.x() * dbeta + beta * Jf.row(0);
  J(0, 0) += 1.0;
  J.row(1) = dy2;
  return J;
}

std::optional<Pixel> ForwardMap(const Warp& warp, const Pixel& p1) {
  if (const auto* d = std::get_if<DiscreteHomography>(&warp)) return Dehomogenize(d->H, p1);
  if (const auto* m = std::get_if<RsDiffModel>(&warp)) return ForwardMapRs(*m, p1);
  return ForwardModel(CellModelAt(std::get<WarpField>(warp), p1), p1);
}

std::optional<Pixel> InverseMap(const Warp& warp, const Pixel& q) {
  if (const auto* d = std::get_if<DiscreteHomography>(&warp)) return InverseModel(*d, q);
  if (const auto* m = std::get_if<RsDiffModel>(&warp)) return InverseMapRs(*m, q);
  // Piecewise field: solve with one cell's model, move to the cell containing
  // the solution, stop when consistent or when a cell repeats.
  const WarpField& f = std::get<WarpField>(warp);
  int cell = f.grid.IndexAt(q);
  std::vector<int> visited;
  std::optional<Pixel> p;
  for (int round = 0; round < 8; ++round) {
    p = InverseModel(f.CellModel(cell), q);
    if (!p) return std::nullopt;
    const int next = f.grid.IndexAt(*p);
    if (next == cell) return p;
    visited.push_back(cell);
    if (std::find(visited.begin(), visited.end(), next) != visited.end()) return p;
    cell = next;
  }
  return p;
}

std::optional<Pixel> RectifyPoint(const RsDiffModel& m, const Pixel& x, Frame frame,
                                  double max_shift) {
  const double beta = BetaAt(m, frame, x.y());
  Pixel g = x - beta * FlowGs(m.H, x);
  for (int it = 0; it < 20; ++it) {
    const Pixel F = g + beta * FlowGs(m.H, g) - x;
    const Eigen::Matrix2d J =
        Eigen::Matrix2d::Identity() + beta * FlowGsJacobian(m.H, g);
    if (!(std::abs(J.determinant()) > 1e-12)) return std::nullopt;
    const Pixel step = J.inverse() * F;
    g -= step;
    if (!g.allFinite() || (g - x).norm() > max_shift) return std::nullopt;
    if (step.norm() < 1e-8) return g;
  }
  return std::nullopt;
}

std::optional<Pixel> RectifyPoint(const Warp& warp, const Pixel& x, Frame frame,
                                  double max_shift) {
  if (const auto* d = std::get_if<DiscreteHomography>(&warp)) {
    // No scanline model: the canvas is frame 1.
    if (frame == Frame::kFirst) return x;
    return InverseModel(*d, x);
  }
  if (const auto* m = std::get_if<RsDiffModel>(&warp)) {
    return RectifyPoint(*m, x, frame, max_shift);
  }
  const Model cell = CellModelAt(std::get<WarpField>(warp), x);
  if (const auto* d = std::get_if<DiscreteHomography>(&cell)) {
    return RectifyPoint(Warp(*d), x, frame, max_shift);
  }
  return RectifyPoint(std::get<RsDiffModel>(cell), x, frame, max_shift);
}

std::optional<Pixel> UnrectifyPoint(const RsDiffModel& m, const Pixel& g, Frame frame) {
  const BetaPoly b = BetaOf(m, frame);
  const Flow f = FlowGs(m.H, g);
  // y = g_y + beta(y) f_y
  const double h = m.rs.height;
  const auto y = NearestRoot(b.b2 * f.y(), b.b1 * f.y() - 1.0, g.y() + b.b0 * f.y(),
                             g.y() + b.b0 * f.y(), -0.5 * h, 1.5 * h);
  if (!y) return std::nullopt;
  return Pixel(g.x() + BetaAt(m, frame, *y) * f.x(), *y);
}

std::optional<Pixel> UnrectifyPoint(const Warp& warp, const Pixel& g, Frame frame) {
  if (const auto* d = std::get_if<DiscreteHomography>(&warp)) {
    if (frame == Frame::kFirst) return g;
    return Dehomogenize(d->H, g);
  }
  if (const auto* m = std::get_if<RsDiffModel>(&warp)) return UnrectifyPoint(*m, g, frame);
  const Model cell = CellModelAt(std::get<WarpField>(warp), g);
  if (const auto* d = std::get_if<DiscreteHomography>(&cell)) {
    return UnrectifyPoint(Warp(*d), g, frame);
  }
  return UnrectifyPoint(std::get<RsDiffModel>(cell), g, frame);
}

double StitchEquationResidual(const RsDiffModel& m, const Pixel& p1, const Pixel& p2) {
  return (p2 - p1 - Beta(m.k, p1.y(), p2.y(), m.rs) * FlowGs(m.H, p1)).norm();
}

double RectifyEquationResidual(const RsDiffModel& m, const Pixel& x, const Pixel& g,
                               Frame frame) {
  return (x - g - BetaAt(m, frame, x.y()) * FlowGs(m.H, g)).norm();
}

std::optional<Pixel> ComposeForward(std::span<const Warp> models, const Pixel& p0,
                                    size_t count) {
  if (count > models.size()) {
    throw Error(ErrorCode::kParameterDomain, "composition longer than the chain");
  }
  std::optional<Pixel> p = p0;
  for (size_t i = 0; i < count && p; ++i) p = ForwardMap(models[i], *p);
  return p;
}

std::optional<BlendMode> ParseBlendMode(const std::string& name) {
  std::string key;
  for (char c : name) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key == "linear") return BlendMode::kLinear;
  if (key == "average") return BlendMode::kAverage;
  if (key == "last") return BlendMode::kLast;
  return std::nullopt;
}

namespace {

using PointMap = std::function<std::optional<Pixel>(const Pixel&)>;

struct Layer {
  const Raster* source;
  PointMap to_source;    // reference -> source
  PointMap from_source;  // source -> reference (bounds only)
};

std::vector<Pixel> BoundaryRing(int w, int h, double spacing) {
  std::vector<Pixel> ring;
  auto edge = [&](Pixel a, Pixel b) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int i = 0; i < n; ++i) ring.push_back(a + (b - a) * (static_cast<double>(i) / n));
  };
  const Pixel c00(0, 0), c10(w - 1, 0), c11(w - 1, h - 1), c01(0, h - 1);
  edge(c00, c10);
  edge(c10, c11);
  edge(c11, c01);
  edge(c01, c00);
  return ring;
}

double Feather(const Raster& r, const Pixel& s) {
  const double d = std::min({s.x() + 0.5, r.width - 0.5 - s.x(), s.y() + 0.5,
                             r.height - 0.5 - s.y()});
  return std::max(d, 1e-3);
}

template <typename F>
void ParallelRows(int rows, F&& body) {
  const int threads = std::clamp(DefaultThreadCount(), 1, std::max(rows, 1));
  if (threads == 1) {
    body(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] { body(rows * t / threads, rows * (t + 1) / threads); });
  }
  for (std::thread& th : pool) th.join();
}

Canvas Render(const std::vector<Layer>& layers, int ref_w, int ref_h,
              const StitchOptions& options, bool rectified,
              std::vector<std::string> warnings) {
  int channels = 1;
  for (const Layer& l : layers) {
    l.source->Validate();
    channels = std::max(channels, l.source->channels);
  }
  std::vector<Raster> sources;
  for (const Layer& l : layers) {
    sources.push_back(channels == 3 ? ToRgb(*l.source) : *l.source);
  }

  double minx = std::numeric_limits<double>::infinity(), miny = minx;
  double maxx = -minx, maxy = -minx;
  for (size_t li = 0; li < layers.size(); ++li) {
    int mapped = 0, total = 0;
    for (const Pixel& p : BoundaryRing(sources[li].width, sources[li].height,
                                       options.ring_spacing)) {
      ++total;
      const auto q = layers[li].from_source(p);
      if (!q || !q->allFinite()) continue;
      ++mapped;
      minx = std::min(minx, q->x());
      maxx = std::max(maxx, q->x());
      miny = std::min(miny, q->y());
      maxy = std::max(maxy, q->y());
    }
    if (mapped < total) {
      warnings.push_back("source " + std::to_string(li) + ": " +
                         std::to_string(total - mapped) + " of " + std::to_string(total) +
                         " boundary samples unmapped");
    }
  }
  if (!(minx <= maxx && miny <= maxy)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "no source maps into the canvas");
  }
  const double fx = options.max_extent_factor * ref_w;
  const double fy = options.max_extent_factor * ref_h;
  if (minx < -fx || miny < -fy || maxx > ref_w + fx || maxy > ref_h + fy) {
    warnings.push_back("canvas clipped to the maximum extent");
    minx = std::max(minx, -fx);
    miny = std::max(miny, -fy);
    maxx = std::min(maxx, ref_w + fx);
    maxy = std::min(maxy, ref_h + fy);
  }

  Canvas canvas;
  canvas.rectified = rectified;
  canvas.offset = Pixel(std::floor(minx + 1e-6), std::floor(miny + 1e-6));
  canvas.width = static_cast<int>(std::ceil(maxx - 1e-6) - canvas.offset.x()) + 1;
  canvas.height = static_cast<int>(std::ceil(maxy - 1e-6) - canvas.offset.y()) + 1;
  const size_t npix = static_cast<size_t>(canvas.width) * canvas.height;

  for (size_t li = 0; li < layers.size(); ++li) {
    Raster layer(canvas.width, canvas.height, channels);
    layer.mask.assign(npix, 0);
    canvas.layers.push_back(std::move(layer));
  }
  std::vector<std::vector<float>> weights(layers.size(), std::vector<float>(npix, 0.0f));

  ParallelRows(canvas.height, [&](int r0, int r1) {
    std::vector<double> v(channels);
    for (int j = r0; j < r1; ++j) {
      for (int i = 0; i < canvas.width; ++i) {
        const Pixel q = canvas.offset + Pixel(i, j);
        const size_t idx = static_cast<size_t>(j) * canvas.width + i;
        for (size_t li = 0; li < layers.size(); ++li) {
          const auto s = layers[li].to_source(q);
          if (!s) continue;
          bool ok = true;
          for (int c = 0; c < channels && ok; ++c) {
            const auto val = SampleBilinear(sources[li], s->x(), s->y(), c);
            if (val) v[c] = *val; else ok = false;
          }
          if (!ok) continue;
          Raster& out = canvas.layers[li];
          for (int c = 0; c < channels; ++c) {
            out.data[idx * channels + c] =
                static_cast<uint8_t>(std::clamp(std::lround(v[c]), 0L, 255L));
          }
          out.mask[idx] = 255;
          weights[li][idx] = static_cast<float>(Feather(sources[li], *s));
        }
      }
    }
  });

  canvas.image = Raster(canvas.width, canvas.height, channels);
  canvas.image.mask.assign(npix, 0);
  canvas.diff = Raster(canvas.width, canvas.height, 3);
  for (size_t idx = 0; idx < npix; ++idx) {
    double wsum = 0.0;
    std::vector<double> acc(channels, 0.0);
    int covered = 0;
    int first = -1, second = -1;
    for (size_t li = 0; li < layers.size(); ++li) {
      const Raster& l = canvas.layers[li];
      if (!l.mask[idx]) continue;
      ++covered;
      if (first < 0) first = static_cast<int>(li); else if (second < 0) second = static_cast<int>(li);
      double w = 1.0;
      if (options.blend == BlendMode::kLinear) w = weights[li][idx];
      if (options.blend == BlendMode::kLast) {
        wsum = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
      }
      for (int c = 0; c < channels; ++c) acc[c] += w * l.data[idx * channels + c];
      wsum += w;
    }
    if (covered == 0) continue;
    canvas.image.mask[idx] = 255;
    for (int c = 0; c < channels; ++c) {
      canvas.image.data[idx * channels + c] =
          static_cast<uint8_t>(std::clamp(std::lround(acc[c] / wsum), 0L, 255L));
    }
    auto gray = [&](int li) {
      const Raster& l = canvas.layers[li];
      if (channels == 1) return static_cast<double>(l.data[idx]);
      return 0.299 * l.data[idx * 3] + 0.587 * l.data[idx * 3 + 1] + 0.114 * l.data[idx * 3 + 2];
    };
    if (second >= 0) {
      ++canvas.overlap_pixels;
      const double d = std::min(255.0, std::abs(gray(first) - gray(second)));
      canvas.diff.data[idx * 3] = static_cast<uint8_t>(std::lround(d));
      canvas.diff.data[idx * 3 + 1] = static_cast<uint8_t>(std::lround(255.0 - d));
    } else {
      const uint8_t g = static_cast<uint8_t>(std::lround(0.5 * gray(first)));
      canvas.diff.data[idx * 3] = canvas.diff.data[idx * 3 + 1] = canvas.diff.data[idx * 3 + 2] = g;
    }
  }
  if (layers.size() > 1 && canvas.overlap_pixels == 0) {
    warnings.push_back("empty overlap: sources placed disjointly");
  }
  canvas.warnings = std::move(warnings);
  return canvas;
}

bool HasScanlineModel(const Warp& w) {
  if (std::holds_alternative<RsDiffModel>(w)) return true;
  if (const auto* f = std::get_if<WarpField>(&w)) return f->mode != FieldMode::kGsDiscrete;
  return false;
}

double GammaOf(const Warp& w) {
  if (const auto* m = std::get_if<RsDiffModel>(&w)) return m->rs.gamma;
  if (const auto* f = std::get_if<WarpField>(&w)) return f->rs.gamma;
  return 0.0;
}

}  // namespace

Canvas WarpAndStitch(const Raster& img1, const Raster& img2, const Warp& warp,
                     const StitchOptions& options) {
  img1.Validate();
  img2.Validate();
  std::vector<std::string> warnings;
  std::vector<Layer> layers;
  const double max_shift = 2.0 * std::hypot(img1.width, img1.height);
  if (options.rectify) {
    if (!HasScanlineModel(warp)) {
      warnings.push_back("discrete model: rectified canvas is frame 1");
    } else if (GammaOf(warp) == 0.0) {
      warnings.push_back("gamma = 0: rectification is the identity on frame 1");
    }
    layers.push_back({&img1,
                      [&](const Pixel& g) { return UnrectifyPoint(warp, g, Frame::kFirst); },
                      [&](const Pixel& p) { return RectifyPoint(warp, p, Frame::kFirst, max_shift); }});
    layers.push_back({&img2,
                      [&](const Pixel& g) { return UnrectifyPoint(warp, g, Frame::kSecond); },
                      [&](const Pixel& p) { return RectifyPoint(warp, p, Frame::kSecond, max_shift); }});
    return Render(layers, img1.width, img1.height, options, true, std::move(warnings));
  }
  layers.push_back({&img1, [&](const Pixel& q) { return InverseMap(warp, q); },
                    [&](const Pixel& p) { return ForwardMap(warp, p); }});
  layers.push_back({&img2, [](const Pixel& q) { return std::optional<Pixel>(q); },
                    [](const Pixel& p) { return std::optional<Pixel>(p); }});
  return Render(layers, img2.width, img2.height, options, false, std::move(warnings));
}

Canvas RectifyImage(const Raster& img, const Warp& warp, const StitchOptions& options) {
  img.Validate();
  std::vector<std::string> warnings;
  if (!HasScanlineModel(warp)) {
    warnings.push_back("discrete model: no scanline motion, output is the input");
  } else if (GammaOf(warp) == 0.0) {
    warnings.push_back("gamma = 0: rectification is the identity (beta1 = 0)");
  }
  const double max_shift = 2.0 * std::hypot(img.width, img.height);
  std::vector<Layer> layers;
  layers.push_back({&img, [&](const Pixel& g) { return UnrectifyPoint(warp, g, Frame::kFirst); },
                    [&](const Pixel& p) { return RectifyPoint(warp, p, Frame::kFirst, max_shift); }});
  return Render(layers, img.width, img.height, options, true, std::move(warnings));
}

Canvas ChainPairwise(const std::vector<Raster>& frames, const std::vector<Warp>& models,
                     const StitchOptions& options) {
  if (frames.empty()) {
    throw Error(ErrorCode::kParameterDomain, "need at least one frame");
  }
  if (models.size() + 1 != frames.size()) {
    throw Error(ErrorCode::kParameterDomain, "need one model per consecutive frame pair");
  }
  std::vector<std::string> warnings;
  bool rectify = options.rectify;
  if (rectify && (models.empty() || !HasScanlineModel(models[0]))) {
    warnings.push_back("rectification needs a scanline model for frame 0; disabled");
    rectify = false;
  }
  const double max_shift = 2.0 * std::hypot(frames[0].width, frames[0].height);
  const std::span<const Warp> chain(models);

  auto base = [&, rectify](const Pixel& q) -> std::optional<Pixel> {
    if (!rectify) return q;
    return UnrectifyPoint(models[0], q, Frame::kFirst);
  };
  std::vector<Layer> layers;
  for (size_t j = 0; j < frames.size(); ++j) {
    PointMap to = [&, j](const Pixel& q) -> std::optional<Pixel> {
      const auto p0 = base(q);
      if (!p0) return std::nullopt;
      return ComposeForward(chain, *p0, j);
    };
    PointMap from = [&, j, rectify](const Pixel& p) -> std::optional<Pixel> {
      std::optional<Pixel> x = p;
      for (size_t i = j; i-- > 0 && x;) x = InverseMap(models[i], *x);
      if (!x || !rectify) return x;
      return RectifyPoint(models[0], *x, Frame::kFirst, max_shift);
    };
    layers.push_back({&frames[j], std::move(to), std::move(from)});
  }
  return Render(layers, frames[0].width, frames[0].height, options, rectify,
                std::move(warnings));
}

nlohmann::json CanvasMetadata(const Canvas& canvas) {
  nlohmann::json j;
  j["offset"] = {canvas.offset.x(), canvas.offset.y()};
  j["extent"] = {canvas.width, canvas.height};
  j["rectified"] = canvas.rectified;
  j["overlap_pixels"] = canvas.overlap_pixels;
  nlohmann::json sources = nlohmann::json::array();
  for (const Raster& l : canvas.layers) {
    size_t covered = 0;
    for (uint8_t m : l.mask) covered += m ? 1 : 0;
    sources.push_back({{"covered_pixels", covered}});
  }
  j["sources"] = std::move(sources);
  j["warnings"] = canvas.warnings;
  return j;
}

}  // namespace rsstitch
