#include <doctest.h>

#include <cmath>
#include <random>

#include "planedepth/error.hpp"
#include "planedepth/interp.hpp"
#include "planedepth/pcbp.hpp"
#include "planedepth/pipeline.hpp"
#include "planedepth/synthetic.hpp"

using namespace planedepth;

namespace {

const Intrinsicsd kCam{200.0, 10.0, 5.0};

// 1 x 5 strip [0 1 2 3 4]: node 0 has one neighbour, node 2 has two.
SuperpixelGraph strip() {
  LabelGrid labels(1, 5);
  labels << 0, 1, 2, 3, 4;
  return SuperpixelGraph::from_labels(labels);
}

// Star: centre 0 with neighbours 1, 2, 3 and no contact between them.
SuperpixelGraph star() {
  LabelGrid labels(3, 3);
  labels << 4, 1, 4, 2, 0, 3, 4, 4, 4;
  // Relabel so that ids are contiguous; 4 touches 1, 2, 3 and 0 as well.
  return SuperpixelGraph::from_labels(labels);
}

std::vector<Planed> fronto(std::initializer_list<double> depths) {
  std::vector<Planed> out;
  for (const double z : depths) out.push_back(Planed::front_parallel(z));
  return out;
}

double coefficient_gap(const Planed& a, const Planed& b) {
  return (a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff();
}

// Index of the scene plane each pixel sees, recovered from the ground truth.
struct GtSegmentation {
  SuperpixelGraph graph;
  std::vector<Planed> planes;
};

GtSegmentation gt_segmentation(const SyntheticScene& scene, const SyntheticFrame& frame) {
  GtSegmentation out;
  out.planes.push_back(scene.road);
  for (const auto& o : scene.objects) out.planes.push_back(o.plane);
  LabelGrid labels(scene.height, scene.width);
  for (int v = 0; v < scene.height; ++v)
    for (int u = 0; u < scene.width; ++u) {
      int best = -1;
      double err = 1e-9;
      for (std::size_t p = 0; p < out.planes.size(); ++p) {
        const double e = std::abs(depth_along_ray(out.planes[p], scene.k.ray(u, v)) - frame.frame.gt->depth(v, u));
        if (e < err) err = e, best = static_cast<int>(p);
      }
      REQUIRE(best >= 0);
      labels(v, u) = best;
    }
  out.graph = SuperpixelGraph::from_labels(labels);
  return out;
}

struct Street {
  SyntheticScene scene;
  SyntheticFrame frame;
};

const Street& street(bool shadows) {
  static const Street plain{SyntheticScene::street(false), generate_synthetic(SyntheticScene::street(false))};
  static const Street shaded{SyntheticScene::street(true), generate_synthetic(SyntheticScene::street(true))};
  return shadows ? shaded : plain;
}

double iou(const MaskGrid& a, const MaskGrid& b) {
  const auto x = a.cast<bool>(), y = b.cast<bool>();
  return double((x && y).count()) / double((x || y).count());
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(parse_mode("planar") == Mode::Planar);
  CHECK(parse_mode("cardboard") == Mode::Cardboard);
  CHECK(std::string(to_string(Mode::Cardboard)) == "cardboard");
  CHECK_THROWS_AS(parse_mode("voxel"), Error);
}

TEST_CASE("planar sampler: slot layout with zero noise") {
  const auto g = strip();
  const auto inc = fronto({10, 11, 12, 13, 14});
  const auto set = sample_particles_planar(inc, g, Eigen::Vector4d::Zero(), 3, 10);
  REQUIRE(set.size() == 5);
  for (int i = 0; i < 5; ++i) {
    REQUIRE(set[i].size() == 10);
    CHECK(set[i][0] == inc[i]);
    for (int s = 1; s <= 5; ++s) CHECK(coefficient_gap(set[i][s], inc[i]) < 1e-15);
  }
  // Node 0 has a single neighbour: every neighbour slot holds it.
  for (int s = 6; s < 10; ++s) CHECK(set[0][s] == inc[1]);
  // Node 2 cycles through neighbours 1, 3.
  CHECK(set[2][6] == inc[1]);
  CHECK(set[2][7] == inc[3]);
  CHECK(set[2][8] == inc[1]);
  CHECK(set[2][9] == inc[3]);
}

TEST_CASE("planar sampler: three neighbours cycle in ascending id order") {
  const auto g = star();
  REQUIRE(g.size() == 5);
  int hub = -1;
  for (int i = 0; i < g.size(); ++i)
    if (g.neighbors[i].size() == 4) hub = i;
  REQUIRE(hub >= 0);
  std::vector<Planed> inc;
  for (int i = 0; i < g.size(); ++i) inc.push_back(Planed::front_parallel(5.0 + i));
  const auto set = sample_particles_planar(inc, g, Eigen::Vector4d::Constant(0.1), 1, 9);
  // floor(9 / 2) = 4 proposals then 4 neighbour slots.
  for (int s = 0; s < 4; ++s) CHECK(set[hub][5 + s] == inc[g.neighbors[hub][s]]);
}

TEST_CASE("planar sampler: isolated superpixel gets proposals only") {
  LabelGrid one = LabelGrid::Zero(2, 2);
  const auto g = SuperpixelGraph::from_labels(one);
  const auto inc = fronto({10});
  const auto set = sample_particles_planar(inc, g, Eigen::Vector4d::Constant(0.05), 5, 6);
  for (int s = 1; s < 6; ++s) CHECK(coefficient_gap(set[0][s], inc[0]) > 0.0);
}

TEST_CASE("planar sampler: proposals are unit-normal planes, deterministic in the seed") {
  const auto g = strip();
  const auto inc = fronto({10, 11, 12, 13, 14});
  const Eigen::Vector4d sigma(0.02, 0.02, 0.02, 0.2);
  const auto a = sample_particles_planar(inc, g, sigma, 42, 10);
  const auto b = sample_particles_planar(inc, g, sigma, 42, 10);
  const auto c = sample_particles_planar(inc, g, sigma, 43, 10);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& slots : a)
    for (const auto& s : slots) CHECK(std::abs(s.normal().norm() - 1.0) < 1e-12);
  CHECK_THROWS_AS(sample_particles_planar(inc, g, sigma, 1, 1), Error);
}

TEST_CASE("cardboard sampler: road slot, object slots on the shared normal") {
  const auto g = strip();
  const Planed road = Planed::from_normal_offset(Point3d(0.0, 0.98, -0.2).normalized(), -1.6);
  DenseDepth dense0(5, 1);
  dense0.depth.setConstant(9.0);
  const auto model = CardboardModel::make(g, road, kCam, dense0);
  CHECK(std::abs(model.object_normal.dot(road.normal())) < 1e-15);

  std::vector<Planed> inc{model.object_plane(0, 7.0), road, model.object_plane(2, 12.0), road, road};
  const auto zero = sample_particles_cardboard(inc, model, g, 0.0, 9, 10);
  for (int i = 0; i < 5; ++i) {
    CHECK(zero[i][0] == inc[i]);
    CHECK(zero[i][1] == road);
    // (10 - 1) / 2 = 4 object proposals at the incumbent depth, or the dense0 mean for road incumbents.
    const double base = i == 0 ? 7.0 : i == 2 ? 12.0 : 9.0;
    for (int s = 2; s < 6; ++s) {
      CHECK(model.is_object(zero[i][s]));
      CHECK(depth_along_ray(zero[i][s], model.centroid_rays[i]) == doctest::Approx(base).epsilon(1e-12));
    }
  }
  CHECK(zero[2][6] == inc[1]);
  CHECK(zero[2][7] == inc[3]);

  const auto noisy = sample_particles_cardboard(inc, model, g, 50.0, 9, 10);
  for (const auto& slots : noisy)
    for (std::size_t s = 2; s < 6; ++s) {
      CHECK(std::abs(slots[s].normal().dot(road.normal())) < 1e-15);
      CHECK(depth_along_ray(slots[s], model.centroid_rays[&slots - noisy.data()]) >= 0.1 - 1e-12);
    }
  CHECK(noisy == sample_particles_cardboard(inc, model, g, 50.0, 9, 10));
}

TEST_CASE("pcbp: zero iterations return the initial state") {
  const auto g = strip();
  const std::vector<std::vector<PixelDepthd>> samples(5);
  SolverConfig cfg;
  cfg.iterations = 0;
  const auto init = fronto({3, 4, 5, 6, 7});
  const auto r = pcbp_run({g, samples, kCam, {}}, cfg, init);
  CHECK(r.planes == init);
  CHECK(r.trace.empty());
  CHECK(r.accepted == 0);
}

TEST_CASE("pcbp: mode and model must agree") {
  const auto g = strip();
  const std::vector<std::vector<PixelDepthd>> samples(5);
  const auto init = fronto({3, 4, 5, 6, 7});
  SolverConfig cardboard = SolverConfig::defaults(Mode::Cardboard);
  try {
    pcbp_run({g, samples, kCam, {}}, cardboard, init);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ModeMismatch);
  }
  DenseDepth dense0(5, 1);
  dense0.depth.setConstant(5.0);
  const auto model = CardboardModel::make(g, Planed::from_normal_offset(Point3d::UnitY(), -1.5), kCam, dense0);
  CHECK_THROWS_AS(pcbp_run({g, samples, kCam, {}}, SolverConfig{}, init, model), Error);
}

TEST_CASE("pcbp: a two-plane toy problem converges from a nearby start") {
  // Left half at 8 m, right half at 20 m, one superpixel per column pair.
  // Proposals are local, so the start is within a metre of the answer.
  LabelGrid labels(4, 8);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 8; ++u) labels(v, u) = u / 2;
  const auto g = SuperpixelGraph::from_labels(labels);
  std::vector<PixelDepthd> pts;
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 8; ++u) pts.push_back({double(u), double(v), u < 4 ? 8.0 : 20.0});
  const auto samples = group_samples(g, SparseDepth::from_samples(8, 4, pts));
  SolverConfig cfg;
  cfg.iterations = 30;
  const auto r = pcbp_run({g, samples, kCam, {}}, cfg, fronto({8.6, 7.5, 20.8, 19.3}));
  CHECK(r.final.unary < 0.01 * r.initial.unary);
  // What remains is the 8-pixel depth edge: 8 x tau1 x theta2 = 4.8.
  CHECK(r.final.pairwise == doctest::Approx(4.8).epsilon(1e-2));
  CHECK(depth_along_ray(r.planes[0], kCam.ray(0, 0)) == doctest::Approx(8.0).epsilon(1e-2));
  CHECK(depth_along_ray(r.planes[3], kCam.ray(7, 3)) == doctest::Approx(20.0).epsilon(1e-2));
  REQUIRE(r.trace.size() == 30);
  for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].total <= r.trace[t - 1].total);
  CHECK(r.trace.back().total == r.final.total());
}

TEST_CASE("render: front-parallel state gives a constant map") {
  const auto g = strip();
  const auto d = render_depth(fronto({10, 10, 10, 10, 10}), g, kCam);
  CHECK((d.depth == 10.0).all());
}

TEST_CASE("render: infeasible pixels take the region median, then the fallback") {
  LabelGrid labels(1, 4);
  labels << 0, 0, 0, 1;
  const auto g = SuperpixelGraph::from_labels(labels);
  const Intrinsicsd k{1.0, 0.0, 0.0};
  // Plane x = 1.5 seen only for rays with x/z > 0: u = 1 gives 1.5, u = 2 gives 0.75, u = 0 none.
  const Planed side = Planed::from_normal_offset(Point3d::UnitX(), -1.5);
  const std::vector<Planed> state{side, Planed::from_normal_offset(Point3d::UnitZ(), 2.0)};
  DenseDepth fallback(4, 1);
  fallback.depth.setConstant(42.0);
  const auto d = render_depth(state, g, k, fallback);
  CHECK(d.depth(0, 1) == 1.5);
  CHECK(d.depth(0, 2) == 0.75);
  CHECK(d.depth(0, 0) == doctest::Approx(1.125));
  CHECK(d.depth(0, 3) == 42.0);
  CHECK(render_depth(state, g, k).depth(0, 3) == 0.0);
}

TEST_CASE("render: ground-truth planes reproduce the generator depth") {
  const auto& s = street(false);
  const auto gt = gt_segmentation(s.scene, s.frame);
  const auto d = render_depth(gt.planes, gt.graph, s.scene.k);
  CHECK((d.depth - s.frame.frame.gt->depth).abs().maxCoeff() < 1e-6);
  // Fitting planes to the render and rendering again is a fixpoint.
  const auto refit = init_planes(gt.graph, d, s.scene.k);
  const auto again = render_depth(refit, gt.graph, s.scene.k);
  CHECK((again.depth - d.depth).abs().maxCoeff() < 1e-6);
}

TEST_CASE("free space mask") {
  const auto g = strip();
  Labeling all{Mode::Cardboard, std::vector<int>(5, 1), std::vector<bool>(5, true)};
  CHECK((free_space_mask(all, g) == 1).all());
  Labeling none{Mode::Cardboard, std::vector<int>(5, 0), std::vector<bool>(5, false)};
  CHECK((free_space_mask(none, g) == 0).all());
  Labeling planar{Mode::Planar, std::vector<int>(5, 0), {}};
  try {
    free_space_mask(planar, g);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ModeMismatch);
  }
}

TEST_CASE("trace CSV format") {
  const std::vector<TraceRow> rows{{1, 2.5, 10.0}, {2, 0.1, 3.0}};
  CHECK(format_trace_csv(rows) == "iteration,unary_energy,total_energy\n1,2.5,10\n2,0.10000000000000001,3\n");
}

TEST_CASE("street scene, planar: 200 superpixels cut the energy below 10% of the initial") {
  const auto& s = street(false);
  PipelineConfig cfg;
  cfg.superpixels = 200;
  const auto r = run_complete(s.frame.frame, cfg);
  CHECK(r.pcbp.final.total() <= 0.1 * r.pcbp.initial.total());
  for (std::size_t t = 1; t < r.pcbp.trace.size(); ++t) CHECK(r.pcbp.trace[t].total <= r.pcbp.trace[t - 1].total);
}

TEST_CASE("street scene, cardboard: initial labels and free space follow the road mask") {
  const auto& s = street(true);
  PipelineConfig cfg;
  cfg.mode = Mode::Cardboard;
  cfg.superpixels = 450;
  const auto r = run_complete(s.frame.frame, cfg);
  REQUIRE(r.road);
  CHECK(std::abs(r.road->normal().dot(s.scene.road.normal())) > std::cos(M_PI / 180.0));

  // Majority ground-truth label per superpixel against the initial assignment.
  int agree = 0;
  for (int i = 0; i < r.graph.size(); ++i) {
    std::size_t road_pixels = 0;
    for (const auto p : r.graph.regions[i]) road_pixels += s.frame.road_mask(p);
    const bool gt_road = 2 * road_pixels > r.graph.regions[i].size();
    agree += gt_road == (r.init[i] == *r.road);
  }
  CHECK(agree >= 0.95 * r.graph.size());

  REQUIRE(r.free_space);
  CHECK(iou(*r.free_space, s.frame.road_mask) >= 0.9);
  for (const auto& p : r.pcbp.planes)
    if (!(p == *r.road)) CHECK(std::abs(p.normal().dot(r.road->normal())) < 1e-12);
}
