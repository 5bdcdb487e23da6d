#pragma once

// Piecewise-planar CRF energy: squared depth residuals at measured pixels per
// superpixel, plus truncated-l1 depth and orientation coherence between
// adjacent superpixels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "planedepth/geometry.hpp"
#include "planedepth/image.hpp"
#include "planedepth/segmentation.hpp"

namespace planedepth {

struct EnergyParams {
  double theta1 = 1.0;   // data weight
  double theta2 = 0.2;   // depth coherence weight
  double theta3 = 20.0;  // orientation coherence weight
  double tau1 = 3.0;     // depth truncation, meters
  double tau2 = 0.3;     // orientation truncation

  void validate() const;
};

struct EnergyBreakdown {
  double unary = 0.0;
  double pairwise = 0.0;

  [[nodiscard]] double total() const noexcept { return unary + pairwise; }
};

inline double truncated_l1(double x, double tau) noexcept { return std::min(std::abs(x), tau); }

/// theta1 * sum of squared depth residuals; +inf if the plane is parallel to,
/// or behind the camera along, any sample ray.
double data_term(const Planed& s, std::span<const PixelDepthd> samples, const Intrinsicsd& k, double theta1);

/// Sum over boundary pixels (linear indices in an image of `width` columns) of
/// truncated depth differences. Pixels where either plane has no positive
/// depth contribute tau1.
double smoothness_depth(const Planed& si, const Planed& sj, std::span<const std::int32_t> boundary, int width,
                        const Intrinsicsd& k, double tau1);

double smoothness_orient(const Planed& si, const Planed& sj, double tau2) noexcept;

double pairwise_term(const Planed& si, const Planed& sj, std::span<const std::int32_t> boundary, int width,
                     const Intrinsicsd& k, const EnergyParams& params);

/// Measured samples grouped by the superpixel that contains them.
std::vector<std::vector<PixelDepthd>> group_samples(const SuperpixelGraph& graph, const SparseDepth& sparse);

EnergyBreakdown total_energy(std::span<const Planed> state, const SuperpixelGraph& graph,
                             const std::vector<std::vector<PixelDepthd>>& samples_by_region, const Intrinsicsd& k,
                             const EnergyParams& params);

}  // namespace planedepth
