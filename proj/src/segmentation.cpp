#include "planedepth/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace planedepth {

namespace {

struct Lab {
  double l, a, b;
};

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

std::vector<Lab> to_lab(const RgbImage& image) {
  // Lookup for the 256 gamma-expanded values.
  std::array<double, 256> lin{};
  for (int i = 0; i < 256; ++i) lin[i] = srgb_to_linear(i / 255.0);

  std::vector<Lab> lab(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < lab.size(); ++i) {
    const double r = lin[image.data[3 * i]];
    const double g = lin[image.data[3 * i + 1]];
    const double b = lin[image.data[3 * i + 2]];
    const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
    lab[i] = {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
  }
  return lab;
}

double lab_dist2(const Lab& p, const Lab& q) {
  const double dl = p.l - q.l, da = p.a - q.a, db = p.b - q.b;
  return dl * dl + da * da + db * db;
}

struct Center {
  Lab color;
  double x, y;
};

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

int SuperpixelGraph::edge_index(int i, int j) const {
  const SegmentPair key{std::min(i, j), std::max(i, j)};
  const auto it = std::lower_bound(adjacency.begin(), adjacency.end(), key);
  if (it == adjacency.end() || *it != key) return -1;
  return static_cast<int>(it - adjacency.begin());
}

Adjacency build_adjacency(const LabelGrid& labels) {
  const int h = static_cast<int>(labels.rows());
  const int w = static_cast<int>(labels.cols());
  std::map<SegmentPair, std::vector<std::int32_t>> found;

  const auto visit = [&](int u, int v, int nu, int nv) {
    const int a = labels(v, u);
    const int b = labels(nv, nu);
    if (a == b) return;
    found[{std::min(a, b), std::max(a, b)}].push_back(v * w + u);
  };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (u > 0) visit(u, v, u - 1, v);
      if (u + 1 < w) visit(u, v, u + 1, v);
      if (v > 0) visit(u, v, u, v - 1);
      if (v + 1 < h) visit(u, v, u, v + 1);
    }
  }

  Adjacency adj;
  adj.pairs.reserve(found.size());
  adj.boundaries.reserve(found.size());
  for (auto& [pair, pixels] : found) {
    std::sort(pixels.begin(), pixels.end());
    pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
    adj.pairs.push_back(pair);
    adj.boundaries.push_back(std::move(pixels));
  }
  return adj;
}

SuperpixelGraph SuperpixelGraph::from_labels(LabelGrid labels) {
  if (labels.size() == 0) throw Error(ErrorKind::InvalidInput, "empty label grid");
  const int max_label = labels.maxCoeff();
  if (labels.minCoeff() < 0) throw Error(ErrorKind::InvalidInput, "negative label");

  SuperpixelGraph g;
  g.regions.resize(static_cast<std::size_t>(max_label) + 1);
  for (Eigen::Index i = 0; i < labels.size(); ++i) g.regions[labels(i)].push_back(static_cast<std::int32_t>(i));
  for (const auto& r : g.regions)
    if (r.empty()) throw Error(ErrorKind::InvalidInput, "labels must be contiguous 0..S-1");

  auto adj = build_adjacency(labels);
  g.adjacency = std::move(adj.pairs);
  g.boundaries = std::move(adj.boundaries);
  g.neighbors.resize(g.regions.size());
  for (const auto& [i, j] : g.adjacency) {
    g.neighbors[i].push_back(j);
    g.neighbors[j].push_back(i);
  }
  for (auto& n : g.neighbors) std::sort(n.begin(), n.end());
  g.labels = std::move(labels);
  return g;
}

LabelGrid enforce_connectivity(const LabelGrid& labels, int min_size) {
  const int h = static_cast<int>(labels.rows());
  const int w = static_cast<int>(labels.cols());
  const int n = w * h;

  // 4-connected components, numbered in raster order of discovery.
  std::vector<int> comp(n, -1);
  std::vector<int> comp_size;
  std::vector<int> stack;
  for (int start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_size.size());
    const int lab = labels(start);
    int count = 0;
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++count;
      const int u = p % w, v = p / w;
      const int nb[4] = {u > 0 ? p - 1 : -1, u + 1 < w ? p + 1 : -1, v > 0 ? p - w : -1, v + 1 < h ? p + w : -1};
      for (const int q : nb) {
        if (q >= 0 && comp[q] < 0 && labels(q) == lab) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
    comp_size.push_back(count);
  }

  const int nc = static_cast<int>(comp_size.size());
  std::vector<std::set<int>> touching(nc);
  for (int p = 0; p < n; ++p) {
    const int u = p % w;
    if (u + 1 < w && comp[p] != comp[p + 1]) {
      touching[comp[p]].insert(comp[p + 1]);
      touching[comp[p + 1]].insert(comp[p]);
    }
    if (p + w < n && comp[p] != comp[p + w]) {
      touching[comp[p]].insert(comp[p + w]);
      touching[comp[p + w]].insert(comp[p]);
    }
  }

  std::vector<int> parent(nc);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return comp_size[a] < comp_size[b]; });

  for (const int c : order) {
    const int root = find_root(parent, c);
    if (root != c || comp_size[root] >= min_size) continue;
    int best = -1;
    for (const int t : touching[root]) {
      const int r = find_root(parent, t);
      if (r == root) continue;
      if (best < 0 || comp_size[r] > comp_size[best] || (comp_size[r] == comp_size[best] && r < best)) best = r;
    }
    if (best < 0) continue;
    parent[root] = best;
    comp_size[best] += comp_size[root];
    for (const int t : touching[root]) touching[best].insert(t);
    touching[root].clear();
  }

  std::vector<int> final_id(nc, -1);
  int next = 0;
  LabelGrid out(h, w);
  for (int p = 0; p < n; ++p) {
    const int r = find_root(parent, comp[p]);
    if (final_id[r] < 0) final_id[r] = next++;
    out(p) = final_id[r];
  }
  return out;
}

SuperpixelGraph slic_segment(const RgbImage& image, const SlicParams& params) {
  if (image.empty()) throw Error(ErrorKind::InvalidInput, "empty image");
  const int w = image.width, h = image.height;
  const long long n = static_cast<long long>(w) * h;
  if (params.target_count < 1 || params.target_count > n)
    throw Error(ErrorKind::InvalidInput, "superpixel target must lie in [1, pixel count]");
  if (!(params.compactness > 0.0) || params.max_iters < 0)
    throw Error(ErrorKind::InvalidInput, "compactness must be positive and iterations non-negative");

  const int k = params.target_count;
  const int nx = std::clamp(static_cast<int>(std::lround(std::sqrt(double(k) * w / h))), 1, std::min(k, w));
  const int ny = std::clamp(static_cast<int>(std::lround(double(k) / nx)), 1, h);
  const double sx = double(w) / nx;
  const double sy = double(h) / ny;
  const double step = std::sqrt(sx * sy);

  const auto lab = to_lab(image);
  const auto at = [&](int u, int v) -> const Lab& { return lab[static_cast<std::size_t>(v) * w + u]; };
  const auto gradient = [&](int u, int v) {
    const int u0 = std::max(u - 1, 0), u1 = std::min(u + 1, w - 1);
    const int v0 = std::max(v - 1, 0), v1 = std::min(v + 1, h - 1);
    return lab_dist2(at(u1, v), at(u0, v)) + lab_dist2(at(u, v1), at(u, v0));
  };

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int cu = std::min(static_cast<int>((i + 0.5) * sx), w - 1);
      int cv = std::min(static_cast<int>((j + 0.5) * sy), h - 1);
      double best = gradient(cu, cv);
      int bu = cu, bv = cv;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int u = cu + du, v = cv + dv;
          if (u < 0 || v < 0 || u >= w || v >= h) continue;
          const double g = gradient(u, v);
          if (g < best) {
            best = g;
            bu = u;
            bv = v;
          }
        }
      }
      centers.push_back({at(bu, bv), double(bu), double(bv)});
    }
  }

  LabelGrid labels(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      labels(v, u) = std::min(static_cast<int>(v / sy), ny - 1) * nx + std::min(static_cast<int>(u / sx), nx - 1);

  const double spatial_weight = (params.compactness / step) * (params.compactness / step);
  const int rx = static_cast<int>(std::ceil(sx));
  const int ry = static_cast<int>(std::ceil(sy));
  std::vector<double> dist(static_cast<std::size_t>(n));
  const int nk = static_cast<int>(centers.size());

  for (int iter = 0; iter < params.max_iters; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (int c = 0; c < nk; ++c) {
      const auto& ctr = centers[c];
      const int u0 = std::max(static_cast<int>(ctr.x) - rx, 0), u1 = std::min(static_cast<int>(ctr.x) + rx, w - 1);
      const int v0 = std::max(static_cast<int>(ctr.y) - ry, 0), v1 = std::min(static_cast<int>(ctr.y) + ry, h - 1);
      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) {
          const double dx = u - ctr.x, dy = v - ctr.y;
          const double d = lab_dist2(at(u, v), ctr.color) + spatial_weight * (dx * dx + dy * dy);
          double& cur = dist[static_cast<std::size_t>(v) * w + u];
          if (d < cur) {
            cur = d;
            labels(v, u) = c;
          }
        }
      }
    }

    std::vector<double> acc(static_cast<std::size_t>(nk) * 6, 0.0);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        double* a = &acc[static_cast<std::size_t>(labels(v, u)) * 6];
        const Lab& p = at(u, v);
        a[0] += p.l;
        a[1] += p.a;
        a[2] += p.b;
        a[3] += u;
        a[4] += v;
        a[5] += 1.0;
      }
    }
    for (int c = 0; c < nk; ++c) {
      const double* a = &acc[static_cast<std::size_t>(c) * 6];
      if (a[5] == 0.0) continue;
      centers[c] = {{a[0] / a[5], a[1] / a[5], a[2] / a[5]}, a[3] / a[5], a[4] / a[5]};
    }
  }

  const int min_size = std::max(1, static_cast<int>((n / k) / 4));
  return SuperpixelGraph::from_labels(enforce_connectivity(labels, min_size));
}

}  // namespace planedepth
