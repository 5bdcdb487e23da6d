#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "planedepth/segmentation.hpp"

using namespace planedepth;

namespace {

RgbImage uniform(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      auto* px = img.at(u, v);
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  return img;
}

// All unordered pairs (i, j) with some 4-neighbour contact, and the pixels on
// either side of that contact, by exhaustive scan.
std::map<SegmentPair, std::set<std::int32_t>> brute_adjacency(const LabelGrid& labels) {
  std::map<SegmentPair, std::set<std::int32_t>> out;
  const int w = static_cast<int>(labels.cols()), h = static_cast<int>(labels.rows());
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (const auto& [du, dv] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
        const int nu = u + du, nv = v + dv;
        if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
        const int a = labels(v, u), b = labels(nv, nu);
        if (a == b) continue;
        out[{std::min(a, b), std::max(a, b)}].insert(v * w + u);
      }
  return out;
}

}  // namespace

TEST_CASE("slic: uniform 90x90 image with target 9 gives a 3x3 grid of ~900 px segments") {
  const auto g = slic_segment(uniform(90, 90, 120, 120, 120), {9, 10.0, 10});
  REQUIRE(g.size() == 9);
  for (const auto& r : g.regions) CHECK(r.size() == doctest::Approx(900).epsilon(0.15));
  // Each segment's bounding box is near-square.
  for (const auto& r : g.regions) {
    int u0 = 90, u1 = 0, v0 = 90, v1 = 0;
    for (const auto p : r) {
      u0 = std::min(u0, p % 90), u1 = std::max(u1, p % 90);
      v0 = std::min(v0, p / 90), v1 = std::max(v1, p / 90);
    }
    CHECK(std::abs((u1 - u0) - (v1 - v0)) <= 4);
  }
}

TEST_CASE("slic: target 1 covers the image with no adjacency") {
  const auto g = slic_segment(uniform(40, 30, 10, 200, 30), {1, 10.0, 10});
  CHECK(g.size() == 1);
  CHECK(g.adjacency.empty());
  CHECK((g.labels == 0).all());
}

TEST_CASE("slic: two-tone image splits at the colour edge") {
  RgbImage img = uniform(80, 40, 30, 30, 30);
  for (int v = 0; v < 40; ++v)
    for (int u = 37; u < 80; ++u) img.at(u, v)[0] = 230;
  const auto g = slic_segment(img, {2, 10.0, 10});
  REQUIRE(g.size() == 2);
  // Per row, the first column of the right segment is within 2 px of u = 37.
  const int right = g.labels(0, 79);
  for (int v = 0; v < 40; ++v) {
    int first = 80;
    for (int u = 0; u < 80; ++u)
      if (g.labels(v, u) == right) {
        first = u;
        break;
      }
    CHECK(std::abs(first - 37) <= 2);
  }
}

TEST_CASE("slic: output is a deterministic partition with contiguous labels") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> c(0, 255);
  RgbImage img(64, 48);
  for (auto& x : img.data) x = static_cast<std::uint8_t>(c(rng));
  const auto a = slic_segment(img, {30, 10.0, 10});
  const auto b = slic_segment(img, {30, 10.0, 10});
  CHECK((a.labels == b.labels).all());
  std::size_t covered = 0;
  for (int i = 0; i < a.size(); ++i) {
    CHECK(!a.regions[i].empty());
    for (const auto p : a.regions[i]) CHECK(a.labels(p) == i);
    covered += a.regions[i].size();
  }
  CHECK(covered == 64u * 48u);
}

TEST_CASE("adjacency: two segments side by side") {
  LabelGrid labels(2, 4);
  labels << 0, 0, 1, 1, 0, 0, 1, 1;
  const auto adj = build_adjacency(labels);
  REQUIRE(adj.pairs.size() == 1);
  CHECK(adj.pairs[0] == SegmentPair{0, 1});
  CHECK(adj.boundaries[0] == std::vector<std::int32_t>{1, 2, 5, 6});
}

TEST_CASE("adjacency: quadrants are not diagonally adjacent") {
  LabelGrid labels(4, 4);
  labels << 0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3;
  const auto adj = build_adjacency(labels);
  CHECK(adj.pairs == std::vector<SegmentPair>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});
}

TEST_CASE("adjacency: random labelings match an exhaustive scan") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> lab(0, 5);
    LabelGrid labels(9, 11);
    for (Eigen::Index i = 0; i < labels.size(); ++i) labels(i) = lab(rng);
    const auto adj = build_adjacency(labels);
    const auto ref = brute_adjacency(labels);
    REQUIRE(adj.pairs.size() == ref.size());
    std::size_t e = 0;
    for (const auto& [pair, pixels] : ref) {
      CHECK(adj.pairs[e] == pair);
      CHECK(pair.first < pair.second);
      CHECK(adj.boundaries[e] == std::vector<std::int32_t>(pixels.begin(), pixels.end()));
      ++e;
    }
  }
}

TEST_CASE("connectivity: split components get their own labels, tiny ones merge") {
  LabelGrid labels(3, 6);
  labels << 0, 0, 1, 1, 0, 0,  //
      0, 0, 1, 1, 0, 0,        //
      0, 0, 1, 1, 0, 2;
  const auto out = enforce_connectivity(labels, 2);
  // Left and right halves of label 0 are separate; the lone pixel joins its largest neighbour.
  LabelGrid expected(3, 6);
  expected << 0, 0, 1, 1, 2, 2,  //
      0, 0, 1, 1, 2, 2,          //
      0, 0, 1, 1, 2, 2;
  CHECK((out == expected).all());
}

TEST_CASE("graph: neighbours are symmetric and edge_index finds pairs") {
  LabelGrid labels(2, 3);
  labels << 0, 1, 2, 0, 1, 2;
  const auto g = SuperpixelGraph::from_labels(labels);
  CHECK(g.neighbors[0] == std::vector<int>{1});
  CHECK(g.neighbors[1] == std::vector<int>{0, 2});
  CHECK(g.edge_index(2, 1) == g.edge_index(1, 2));
  CHECK(g.edge_index(0, 2) == -1);
  CHECK(g.edge_index(0, 0) == -1);
}
