#pragma once

// Dense initialization from sparse samples and per-superpixel initial planes.

#include <vector>

#include "planedepth/geometry.hpp"
#include "planedepth/image.hpp"
#include "planedepth/segmentation.hpp"

namespace planedepth {

struct PlsOptions {
  double lambda = 1.0;  // weight of the squared-Laplacian penalty, pixel units
  bool robust = true;   // one bisquare reweighting pass on depth-relative sample residuals
};

/// Penalized least squares fill-in:
///   min_D  sum_measured w(x) (D(x) - d(x))^2 + lambda * ||Hess D||_F^2
/// Second differences are taken only where all taps lie in the image, so
/// affine depth ramps are reproduced exactly; a 1e-4 * lambda gradient term
/// keeps the problem well posed for collinear or single samples. lambda is
/// in pixel units. Solved by conjugate gradients with a multigrid
/// preconditioner. Output is floored at half the smallest sample.
DenseDepth pls_interpolate(const SparseDepth& sparse, const PlsOptions& options = {});

/// At most this many region pixels feed each initial plane fit.
inline constexpr int kMaxFitPoints = 200;

/// Region pixels taken with a fixed stride so at most kMaxFitPoints remain.
std::vector<std::int32_t> subsample_region(const std::vector<std::int32_t>& region);

/// Least-squares plane through the back-projected dense0 depths of each
/// region. Rank-deficient fits, and fits that put any region pixel behind the
/// camera, fall back to a front-parallel plane at the median depth.
std::vector<Planed> init_planes(const SuperpixelGraph& graph, const DenseDepth& dense0, const Intrinsicsd& k);

/// Normal shared by every object plane: orthogonal to the road normal with no
/// x component, (0, -c/b, 1) normalized for road coefficients (a, b, c, d).
/// Throws Error(InvalidRoadPlane) when b == 0.
Point3d object_plane_normal(const Planed& road);

struct CardboardInit {
  std::vector<Planed> planes;
  std::vector<bool> road;  // per superpixel
};

/// Labels a superpixel road when the mean distance of its back-projected
/// dense0 points to `road` is at most `epsilon` meters, assigning the road
/// plane; otherwise assigns an object plane through the region centroid ray at
/// the region's mean depth.
CardboardInit init_cardboard(const SuperpixelGraph& graph, const DenseDepth& dense0, const Planed& road,
                             const Intrinsicsd& k, double epsilon);

/// Pixel centroid of a region.
Eigen::Vector2d region_centroid(const std::vector<std::int32_t>& region, int width);

}  // namespace planedepth
