#include "planedepth/interp.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace planedepth {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Stacked difference operator whose squared norm is the thin-plate energy
//   sum D_uu^2 + D_vv^2 + 2 D_uv^2 + eta * |grad D|^2
// Differences are only formed where every tap is inside the grid, so affine
// maps carry no second-order penalty; eta pins the null space to constants.
SparseMatrix smoothness_operator(int w, int h, double eta) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(w) * h * 14);
  int row = 0;
  const auto at = [w](int u, int v) { return v * w + u; };
  const double mixed = std::sqrt(2.0), first = std::sqrt(eta);
  for (int v = 0; v < h; ++v)
    for (int u = 1; u + 1 < w; ++u, ++row) {
      t.emplace_back(row, at(u - 1, v), 1.0);
      t.emplace_back(row, at(u, v), -2.0);
      t.emplace_back(row, at(u + 1, v), 1.0);
    }
  for (int v = 1; v + 1 < h; ++v)
    for (int u = 0; u < w; ++u, ++row) {
      t.emplace_back(row, at(u, v - 1), 1.0);
      t.emplace_back(row, at(u, v), -2.0);
      t.emplace_back(row, at(u, v + 1), 1.0);
    }
  for (int v = 0; v + 1 < h; ++v)
    for (int u = 0; u + 1 < w; ++u, ++row) {
      t.emplace_back(row, at(u, v), mixed);
      t.emplace_back(row, at(u + 1, v), -mixed);
      t.emplace_back(row, at(u, v + 1), -mixed);
      t.emplace_back(row, at(u + 1, v + 1), mixed);
    }
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (u + 1 < w) {
        t.emplace_back(row, at(u, v), -first);
        t.emplace_back(row, at(u + 1, v), first);
        ++row;
      }
      if (v + 1 < h) {
        t.emplace_back(row, at(u, v), -first);
        t.emplace_back(row, at(u, v + 1), first);
        ++row;
      }
    }
  SparseMatrix g(row, static_cast<Eigen::Index>(w) * h);
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

// Vertex-centred bilinear prolongation from a (w+2)/2 x (h+2)/2 grid.
SparseMatrix prolongation(int w, int h, int& wc, int& hc) {
  wc = (w + 2) / 2;
  hc = (h + 2) / 2;
  using Taps = std::vector<std::pair<int, double>>;
  const auto taps = [](int x, int nc) {
    if (x % 2 == 0) return Taps{{x / 2, 1.0}};
    if (x / 2 + 1 < nc) return Taps{{x / 2, 0.5}, {x / 2 + 1, 0.5}};
    return Taps{{x / 2, 1.0}};
  };
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(w) * h * 4);
  for (int v = 0; v < h; ++v) {
    const Taps tv = taps(v, hc);
    for (int u = 0; u < w; ++u) {
      const Taps tu = taps(u, wc);
      for (const auto& [cv, wv] : tv)
        for (const auto& [cu, wu] : tu) t.emplace_back(v * w + u, cv * wc + cu, wv * wu);
    }
  }
  SparseMatrix p(static_cast<Eigen::Index>(w) * h, static_cast<Eigen::Index>(wc) * hc);
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

// Galerkin multigrid V-cycle used as a symmetric preconditioner for CG:
// forward Gauss-Seidel before the coarse correction, backward after.
class Multigrid {
 public:
  Multigrid(SparseMatrix a, int w, int h) {
    constexpr int kCoarsest = 3000;
    while (true) {
      Level level;
      level.diag = a.diagonal();
      if (static_cast<long>(w) * h <= kCoarsest || w < 4 || h < 4) {
        level.a = std::move(a);
        levels_.push_back(std::move(level));
        break;
      }
      int wc = 0, hc = 0;
      level.p = prolongation(w, h, wc, hc);
      SparseMatrix coarse = SparseMatrix(level.p.transpose() * a * level.p);
      level.a = std::move(a);
      levels_.push_back(std::move(level));
      a = std::move(coarse);
      w = wc;
      h = hc;
    }
    direct_.compute(Eigen::SparseMatrix<double>(levels_.back().a));
    if (direct_.info() != Eigen::Success) throw Error(ErrorKind::InvalidInput, "smoothing system is singular");
  }

  const SparseMatrix& matrix() const { return levels_.front().a; }

  Eigen::VectorXd apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(r.size());
    cycle(0, x, r);
    return x;
  }

 private:
  struct Level {
    SparseMatrix a, p;
    Eigen::VectorXd diag;
  };

  static void gauss_seidel(const Level& l, Eigen::VectorXd& x, const Eigen::VectorXd& b, bool forward) {
    const Eigen::Index n = l.a.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index i = forward ? k : n - 1 - k;
      double s = b(i);
      for (SparseMatrix::InnerIterator it(l.a, i); it; ++it)
        if (it.col() != i) s -= it.value() * x(it.col());
      x(i) = s / l.diag(i);
    }
  }

  void cycle(std::size_t depth, Eigen::VectorXd& x, const Eigen::VectorXd& b) const {
    if (depth + 1 == levels_.size()) {
      x = direct_.solve(b);
      return;
    }
    const Level& l = levels_[depth];
    gauss_seidel(l, x, b, true);
    const Eigen::VectorXd rc = l.p.transpose() * (b - l.a * x);
    Eigen::VectorXd xc = Eigen::VectorXd::Zero(rc.size());
    cycle(depth + 1, xc, rc);
    x += l.p * xc;
    gauss_seidel(l, x, b, false);
  }

  std::vector<Level> levels_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> direct_;
};

Eigen::VectorXd solve_spd(const Multigrid& mg, const Eigen::VectorXd& rhs) {
  constexpr int kMaxIters = 500;
  constexpr double kTolerance = 1e-10;
  const SparseMatrix& a = mg.matrix();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  const double stop = kTolerance * rhs.norm();
  if (r.norm() <= stop) return x;
  Eigen::VectorXd z = mg.apply(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 0; it < kMaxIters; ++it) {
    const Eigen::VectorXd ap = a * p;
    const double alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    if (r.norm() <= stop) break;
    z = mg.apply(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return x;
}

constexpr double kGradientWeight = 1e-4;
constexpr double kMinRobustScale = 0.01;  // fraction of depth

double median_of(std::vector<double> values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

DenseDepth pls_interpolate(const SparseDepth& sparse, const PlsOptions& options) {
  if (sparse.empty()) throw Error(ErrorKind::NoData, "interpolation needs at least one depth sample");
  if (!(options.lambda >= 0.0) || !std::isfinite(options.lambda))
    throw Error(ErrorKind::InvalidInput, "smoothness must be finite and non-negative");
  const int w = sparse.width(), h = sparse.height();
  const int n = w * h;
  const auto& samples = sparse.samples();

  double lo = samples.front().depth, hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.depth);
    hi = std::max(hi, s.depth);
  }

  DenseDepth out(w, h);
  if (options.lambda == 0.0) {
    if (samples.size() != static_cast<std::size_t>(n))
      throw Error(ErrorKind::InvalidInput, "zero smoothness requires every pixel to be measured");
    return sparse.to_dense();
  }
  if (samples.size() == 1) {
    out.depth.setConstant(lo);
    return out;
  }

  std::vector<int> index(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    index[i] = static_cast<int>(samples[i].v) * w + static_cast<int>(samples[i].u);

  const SparseMatrix g = smoothness_operator(w, h, kGradientWeight);
  const SparseMatrix penalty = SparseMatrix(g.transpose() * g) * options.lambda;

  std::vector<double> weights(samples.size(), 1.0);
  Eigen::VectorXd solution;

  // Depths are solved relative to the sample mean so the system is well scaled.
  double mean = 0.0;
  for (const auto& s : samples) mean += s.depth;
  mean /= static_cast<double>(samples.size());

  const auto solve = [&] {
    SparseMatrix system = penalty;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      system.coeffRef(index[i], index[i]) += weights[i];
      rhs(index[i]) += weights[i] * (samples[i].depth - mean);
    }
    const Multigrid mg(std::move(system), w, h);
    solution = solve_spd(mg, rhs).array() + mean;
  };
  solve();

  if (options.robust && samples.size() >= 3) {
    std::vector<double> residual(samples.size());
    // Relative residuals: projection outliers grow with range.
    for (std::size_t i = 0; i < samples.size(); ++i)
      residual[i] = (samples[i].depth - solution(index[i])) / samples[i].depth;
    std::vector<double> abs_dev(residual.size());
    const double med = median_of(residual);
    for (std::size_t i = 0; i < residual.size(); ++i) abs_dev[i] = std::abs(residual[i] - med);
    // Residuals within a few percent of depth are never treated as outliers.
    const double scale = std::max(1.4826 * median_of(abs_dev), kMinRobustScale);
    {
      constexpr double c = 4.685;
      std::size_t kept = 0;
      std::vector<double> robust(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = residual[i] / (c * scale);
        robust[i] = std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
        kept += robust[i] > 0.0 ? 1 : 0;
      }
      // Rejecting all but a couple of samples would leave the system close to singular.
      if (kept >= 3) {
        weights = std::move(robust);
        solve();
      }
    }
  }

  // Extrapolation may undershoot; depth stays strictly positive.
  const double floor = 0.5 * lo;
  for (int p = 0; p < n; ++p) out.depth(p) = std::max(solution(p), floor);
  return out;
}

std::vector<std::int32_t> subsample_region(const std::vector<std::int32_t>& region) {
  const std::size_t stride = (region.size() + kMaxFitPoints - 1) / kMaxFitPoints;
  if (stride <= 1) return region;
  std::vector<std::int32_t> out;
  out.reserve(kMaxFitPoints);
  for (std::size_t i = 0; i < region.size(); i += stride) out.push_back(region[i]);
  return out;
}

Eigen::Vector2d region_centroid(const std::vector<std::int32_t>& region, int width) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const std::int32_t p : region) c += Eigen::Vector2d(p % width, p / width);
  return c / static_cast<double>(std::max<std::size_t>(region.size(), 1));
}

std::vector<Planed> init_planes(const SuperpixelGraph& graph, const DenseDepth& dense0, const Intrinsicsd& k) {
  if (dense0.width() != graph.width() || dense0.height() != graph.height())
    throw Error(ErrorKind::InvalidInput, "dense depth and segmentation sizes differ");
  k.validate();
  const int w = graph.width();
  std::vector<Planed> planes;
  planes.reserve(graph.size());
  for (const auto& region : graph.regions) {
    std::vector<Point3d> pts;
    std::vector<double> depths;
    for (const std::int32_t p : subsample_region(region)) {
      const double d = dense0.depth(p);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      pts.push_back(k.ray(p % w, p / w) * d);
      depths.push_back(d);
    }
    if (depths.empty()) {
      for (const std::int32_t p : region)
        if (dense0.depth(p) > 0.0 && std::isfinite(dense0.depth(p))) depths.push_back(dense0.depth(p));
    }
    if (depths.empty()) throw Error(ErrorKind::NoData, "superpixel without any valid initial depth");
    std::optional<Planed> fit;
    try {
      fit = fit_plane_lsq(pts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RankDeficient) throw;
    }
    // A fit across a depth edge can tilt until part of the region falls
    // behind the camera; such planes get the same fallback.
    if (fit)
      for (const std::int32_t p : region)
        if (!(depth_along_ray(*fit, k.ray(p % w, p / w)) > 0.0)) {
          fit.reset();
          break;
        }
    planes.push_back(fit ? *fit : Planed::front_parallel(median_of(depths)));
  }
  return planes;
}

Point3d object_plane_normal(const Planed& road) {
  const Point3d& n = road.normal();
  if (n.y() == 0.0) throw Error(ErrorKind::InvalidRoadPlane, "road normal has no vertical component");
  return Point3d(0.0, -n.z() / n.y(), 1.0).normalized();
}

CardboardInit init_cardboard(const SuperpixelGraph& graph, const DenseDepth& dense0, const Planed& road,
                             const Intrinsicsd& k, double epsilon) {
  if (dense0.width() != graph.width() || dense0.height() != graph.height())
    throw Error(ErrorKind::InvalidInput, "dense depth and segmentation sizes differ");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidInput, "road threshold must be positive");
  k.validate();
  const Point3d object_normal = object_plane_normal(road);
  const int w = graph.width();

  CardboardInit init;
  init.planes.reserve(graph.size());
  init.road.reserve(graph.size());
  for (const auto& region : graph.regions) {
    double dist_sum = 0.0;
    std::size_t count = 0;
    for (const std::int32_t p : subsample_region(region)) {
      const double d = dense0.depth(p);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      dist_sum += point_plane_distance(Point3d(k.ray(p % w, p / w) * d), road);
      ++count;
    }
    double depth_sum = 0.0;
    std::size_t depth_count = 0;
    for (const std::int32_t p : region) {
      const double d = dense0.depth(p);
      if (d > 0.0 && std::isfinite(d)) {
        depth_sum += d;
        ++depth_count;
      }
    }
    if (depth_count == 0) throw Error(ErrorKind::NoData, "superpixel without any valid initial depth");

    if (count > 0 && dist_sum <= epsilon * static_cast<double>(count)) {
      init.planes.push_back(road);
      init.road.push_back(true);
    } else {
      const Eigen::Vector2d c = region_centroid(region, w);
      const Point3d anchor = k.ray(c.x(), c.y()) * (depth_sum / static_cast<double>(depth_count));
      init.planes.push_back(Planed::through_point(object_normal, anchor));
      init.road.push_back(false);
    }
  }
  return init;
}

}  // namespace planedepth
