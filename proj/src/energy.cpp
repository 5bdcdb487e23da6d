#include "planedepth/energy.hpp"

#include <cmath>
#include <limits>

namespace planedepth {

void EnergyParams::validate() const {
  const bool ok = theta1 >= 0 && theta2 >= 0 && theta3 >= 0 && tau1 > 0 && tau2 > 0 && std::isfinite(theta1) &&
                  std::isfinite(theta2) && std::isfinite(theta3) && std::isfinite(tau1) && std::isfinite(tau2);
  if (!ok) throw Error(ErrorKind::InvalidInput, "energy weights must be >= 0 and truncations > 0");
}

double data_term(const Planed& s, std::span<const PixelDepthd> samples, const Intrinsicsd& k, double theta1) {
  double sum = 0.0;
  for (const auto& x : samples) {
    const double predicted = depth_along_ray(s, k.ray(x.u, x.v));
    if (!(predicted > 0.0)) return std::numeric_limits<double>::infinity();
    const double r = predicted - x.depth;
    sum += r * r;
  }
  return theta1 * sum;
}

double smoothness_depth(const Planed& si, const Planed& sj, std::span<const std::int32_t> boundary, int width,
                        const Intrinsicsd& k, double tau1) {
  double sum = 0.0;
  for (const std::int32_t p : boundary) {
    const Point3d ray = k.ray(p % width, p / width);
    const double di = depth_along_ray(si, ray);
    const double dj = depth_along_ray(sj, ray);
    sum += (di > 0.0 && dj > 0.0) ? truncated_l1(di - dj, tau1) : tau1;
  }
  return sum;
}

double smoothness_orient(const Planed& si, const Planed& sj, double tau2) noexcept {
  const double cosine = std::abs(si.normal().dot(sj.normal())) / (si.normal().norm() * sj.normal().norm());
  return truncated_l1(1.0 - cosine, tau2);
}

double pairwise_term(const Planed& si, const Planed& sj, std::span<const std::int32_t> boundary, int width,
                     const Intrinsicsd& k, const EnergyParams& params) {
  return params.theta2 * smoothness_depth(si, sj, boundary, width, k, params.tau1) +
         params.theta3 * smoothness_orient(si, sj, params.tau2);
}

std::vector<std::vector<PixelDepthd>> group_samples(const SuperpixelGraph& graph, const SparseDepth& sparse) {
  if (sparse.width() != graph.width() || sparse.height() != graph.height())
    throw Error(ErrorKind::InvalidInput, "sparse depth and segmentation sizes differ");
  std::vector<std::vector<PixelDepthd>> out(graph.size());
  for (const auto& s : sparse.samples()) out[graph.labels(static_cast<int>(s.v), static_cast<int>(s.u))].push_back(s);
  return out;
}

EnergyBreakdown total_energy(std::span<const Planed> state, const SuperpixelGraph& graph,
                             const std::vector<std::vector<PixelDepthd>>& samples_by_region, const Intrinsicsd& k,
                             const EnergyParams& params) {
  if (state.size() != static_cast<std::size_t>(graph.size()) || samples_by_region.size() != state.size())
    throw Error(ErrorKind::InvalidInput, "state length must equal the superpixel count");
  EnergyBreakdown e;
  for (std::size_t i = 0; i < state.size(); ++i) e.unary += data_term(state[i], samples_by_region[i], k, params.theta1);
  for (std::size_t ei = 0; ei < graph.adjacency.size(); ++ei) {
    const auto [i, j] = graph.adjacency[ei];
    e.pairwise += pairwise_term(state[i], state[j], graph.boundaries[ei], graph.width(), k, params);
  }
  return e;
}

}  // namespace planedepth
