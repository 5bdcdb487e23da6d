#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "planedepth/interp.hpp"

using namespace planedepth;

namespace {

// Smoothness energy written directly over the grid: squared second
// differences along u and v, twice the squared mixed difference, plus
// eta times the squared forward gradient.
double smoothness_energy(const Eigen::MatrixXd& d, double eta) {
  double e = 0.0;
  for (Eigen::Index v = 0; v < d.rows(); ++v)
    for (Eigen::Index u = 0; u < d.cols(); ++u) {
      if (u >= 1 && u + 1 < d.cols()) e += std::pow(d(v, u - 1) - 2 * d(v, u) + d(v, u + 1), 2);
      if (v >= 1 && v + 1 < d.rows()) e += std::pow(d(v - 1, u) - 2 * d(v, u) + d(v + 1, u), 2);
      if (u + 1 < d.cols() && v + 1 < d.rows())
        e += 2 * std::pow(d(v, u) - d(v, u + 1) - d(v + 1, u) + d(v + 1, u + 1), 2);
      if (u + 1 < d.cols()) e += eta * std::pow(d(v, u + 1) - d(v, u), 2);
      if (v + 1 < d.rows()) e += eta * std::pow(d(v + 1, u) - d(v, u), 2);
    }
  return e;
}

// Minimizer of the data term plus lambda * smoothness_energy. The quadratic
// form is recovered by polarization of the energy on unit images.
Eigen::MatrixXd reference_pls(int w, int h, const std::vector<PixelDepthd>& samples, double lambda, double eta) {
  const int n = w * h;
  const auto unit = [&](int i, int j) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(h, w);
    d(i / w, i % w) += 1.0;
    if (j >= 0) d(j / w, j % w) += 1.0;
    return smoothness_energy(d, eta);
  };
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) diag(i) = unit(i, -1);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = i == j ? diag(i) : 0.5 * (unit(i, j) - diag(i) - diag(j));
  a *= lambda;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (const auto& s : samples) {
    const int p = static_cast<int>(s.v) * w + static_cast<int>(s.u);
    a(p, p) += 1.0;
    b(p) += s.depth;
  }
  const Eigen::VectorXd x = a.ldlt().solve(b);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), h, w);
}

std::vector<PixelDepthd> ramp_samples(int w, int h, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::vector<PixelDepthd> out;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (keep(rng)) out.push_back({double(u), double(v), 0.1 * u + 2.0});
  return out;
}

SuperpixelGraph stripes(int w, int h, int stripe) {
  LabelGrid labels(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) labels(v, u) = u / stripe;
  return SuperpixelGraph::from_labels(labels);
}

}  // namespace

TEST_CASE("pls_interpolate: errors") {
  CHECK_THROWS_AS(pls_interpolate(SparseDepth::from_samples(4, 4, {})), Error);
  const auto one = SparseDepth::from_samples(4, 4, {{1, 1, 2.0}});
  CHECK_THROWS_AS(pls_interpolate(one, {-1.0, false}), Error);
  CHECK_THROWS_AS(pls_interpolate(one, {0.0, false}), Error);
}

TEST_CASE("pls_interpolate: single sample gives a constant map") {
  const auto d = pls_interpolate(SparseDepth::from_samples(37, 23, {{11, 5, 5.0}}));
  CHECK((d.depth - 5.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("pls_interpolate: fully observed with zero smoothness is the identity") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> depth(1.0, 80.0);
  std::vector<PixelDepthd> all;
  for (int v = 0; v < 9; ++v)
    for (int u = 0; u < 13; ++u) all.push_back({double(u), double(v), depth(rng)});
  const auto d = pls_interpolate(SparseDepth::from_samples(13, 9, all), {0.0, true});
  for (const auto& s : all) CHECK(d.depth(int(s.v), int(s.u)) == s.depth);
}

TEST_CASE("pls_interpolate: matches dense normal equations on a small grid") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> depth(3.0, 30.0);
  std::uniform_int_distribution<int> pu(0, 12), pv(0, 8);
  std::vector<PixelDepthd> samples;
  for (int i = 0; i < 12; ++i) samples.push_back({double(pu(rng)), double(pv(rng)), depth(rng)});
  const auto sparse = SparseDepth::from_samples(13, 9, samples);
  for (double lambda : {0.05, 1.0, 20.0}) {
    const auto d = pls_interpolate(sparse, {lambda, false});
    const Eigen::MatrixXd ref = reference_pls(13, 9, sparse.samples(), lambda, 1e-4);
    double lo = sparse.samples().front().depth;
    for (const auto& s : sparse.samples()) lo = std::min(lo, s.depth);
    const double floor = 0.5 * lo;
    double worst = 0.0;
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 13; ++u) worst = std::max(worst, std::abs(d.depth(v, u) - std::max(ref(v, u), floor)));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("pls_interpolate: multigrid solution is stationary for the objective") {
  // 90 x 60 exceeds the direct-solve size, so the preconditioned iteration runs.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> noise(-0.5, 0.5);
  auto samples = ramp_samples(90, 60, 0.08, 13);
  for (auto& s : samples) s.depth += 10.0 + noise(rng);
  const auto sparse = SparseDepth::from_samples(90, 60, samples);
  const double lambda = 2.0;
  const auto d = pls_interpolate(sparse, {lambda, false});
  const Eigen::MatrixXd x = d.depth.matrix();
  const auto objective = [&](const Eigen::MatrixXd& m) {
    double e = lambda * smoothness_energy(m, 1e-4);
    for (const auto& s : sparse.samples()) e += std::pow(m(int(s.v), int(s.u)) - s.depth, 2);
    return e;
  };
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd delta(60, 90);
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta(i) = g(rng);
    // Exact directional derivative of a quadratic.
    const double slope = 0.5 * (objective(x + delta) - objective(x - delta));
    CHECK(std::abs(slope) < 1e-6 * objective(x + delta));
  }
}

TEST_CASE("pls_interpolate: 5% ramp is recovered to 5 cm") {
  const auto sparse = SparseDepth::from_samples(160, 60, ramp_samples(160, 60, 0.05, 3));
  const auto d = pls_interpolate(sparse, {0.1, true});
  double worst = 0.0;
  for (int v = 0; v < 60; ++v)
    for (int u = 0; u < 160; ++u) worst = std::max(worst, std::abs(d.depth(v, u) - (0.1 * u + 2.0)));
  CHECK(worst < 0.05);
}

TEST_CASE("property: pls_interpolate stays positive and near the data range") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> depth(0.5, 60.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<PixelDepthd> samples;
    std::uniform_int_distribution<int> pu(0, 63), pv(0, 31);
    for (int i = 0; i < 60; ++i) samples.push_back({double(pu(rng)), double(pv(rng)), depth(rng)});
    const auto sparse = SparseDepth::from_samples(64, 32, samples);
    double lo = 1e9, hi = 0.0;
    for (const auto& s : sparse.samples()) lo = std::min(lo, s.depth), hi = std::max(hi, s.depth);
    const auto d = pls_interpolate(sparse);
    CHECK(d.depth.minCoeff() > 0.0);
    CHECK(d.valid_count() == 64u * 32u);
    CHECK(d.depth.maxCoeff() <= hi + (hi - lo));
  }
}

TEST_CASE("property: pls_interpolate ignores sample order") {
  auto samples = ramp_samples(48, 30, 0.1, 5);
  for (auto& s : samples) s.depth += 0.3 * std::sin(s.u * 0.7 + s.v);
  const auto ref = pls_interpolate(SparseDepth::from_samples(48, 30, samples));
  std::mt19937_64 rng(6);
  std::shuffle(samples.begin(), samples.end(), rng);
  const auto again = pls_interpolate(SparseDepth::from_samples(48, 30, samples));
  CHECK((ref.depth - again.depth).abs().maxCoeff() == 0.0);
}

TEST_CASE("init_planes: constant, slanted and single-pixel regions") {
  const Intrinsicsd k{200.0, 40.0, 15.0};
  const auto graph = stripes(80, 30, 10);
  DenseDepth flat(80, 30);
  flat.depth.setConstant(10.0);
  for (const auto& s : init_planes(graph, flat, k)) {
    CHECK(s.normal().isApprox(Point3d(0, 0, 1), 1e-9));
    CHECK(s.offset() == doctest::Approx(-10.0));
  }

  const auto slanted = Planed::through_point(Point3d(0.2, -0.4, 1.0).normalized(), Point3d(0, 0, 12));
  DenseDepth rendered(80, 30);
  for (int v = 0; v < 30; ++v)
    for (int u = 0; u < 80; ++u) rendered.depth(v, u) = plane_depth_at(slanted, double(u), double(v), k);
  for (const auto& s : init_planes(graph, rendered, k)) {
    CHECK((s.coefficients() - slanted.coefficients()).cwiseAbs().maxCoeff() < 1e-6);
  }

  LabelGrid labels = LabelGrid::Zero(5, 5);
  labels(2, 2) = 1;
  const auto dot = SuperpixelGraph::from_labels(labels);
  DenseDepth d(5, 5);
  d.depth.setConstant(4.0);
  d.depth(2, 2) = 7.5;
  const auto planes = init_planes(dot, d, k);
  CHECK(planes[1] == Planed::front_parallel(7.5));
}

TEST_CASE("property: init_planes only reads a region's own pixels") {
  const Intrinsicsd k{200.0, 40.0, 15.0};
  const auto graph = stripes(80, 30, 10);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> depth(5.0, 20.0);
  DenseDepth d(80, 30);
  for (Eigen::Index i = 0; i < d.depth.size(); ++i) d.depth(i) = depth(rng);
  const auto ref = init_planes(graph, d, k);
  for (int v = 0; v < 30; ++v)
    for (int u = 10; u < 80; ++u) d.depth(v, u) = depth(rng);
  CHECK(init_planes(graph, d, k)[0] == ref[0]);
}

TEST_CASE("init_cardboard: road and object regions") {
  const Intrinsicsd k{300.0, 60.0, 5.0};
  const auto road = Planed::from_coefficients(Eigen::Vector4d(0, 1, 0, -1.65));
  LabelGrid labels(40, 120);
  for (int v = 0; v < 40; ++v)
    for (int u = 0; u < 120; ++u) labels(v, u) = v >= 20 ? 0 : 1;
  const auto graph = SuperpixelGraph::from_labels(labels);
  DenseDepth d(120, 40);
  for (int v = 0; v < 40; ++v)
    for (int u = 0; u < 120; ++u) d.depth(v, u) = v >= 20 ? plane_depth_at(road, double(u), double(v), k) : 15.0;
  const auto init = init_cardboard(graph, d, road, k, 0.2);
  REQUIRE(init.planes.size() == 2);
  CHECK(init.road[0]);
  CHECK(init.planes[0] == road);
  CHECK_FALSE(init.road[1]);
  const Eigen::Vector2d c = region_centroid(graph.regions[1], 120);
  CHECK(plane_depth_at(init.planes[1], c.x(), c.y(), k) == doctest::Approx(15.0));
  CHECK(std::abs(init.planes[1].normal().dot(road.normal())) < 1e-9);
}

TEST_CASE("property: object normals are orthogonal to tilted roads") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> tilt(-0.2, 0.2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto road = Planed::from_coefficients(Eigen::Vector4d(tilt(rng), 1.0, tilt(rng), -1.6));
    CHECK(std::abs(object_plane_normal(road).dot(road.normal())) < 1e-9);
  }
  CHECK_THROWS_AS(object_plane_normal(Planed::front_parallel(3.0)), Error);
}
