#pragma once

// Camera model, planes in Hessian normal form, back-projection and plane
// fitting. Everything here is templated on the scalar type; the rest of the
// library instantiates it with double.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "planedepth/error.hpp"

namespace planedepth {

template <typename Scalar>
using Point3 = Eigen::Matrix<Scalar, 3, 1>;

/// Rays whose dot product with a plane normal falls below this are treated as
/// parallel to the plane.
inline constexpr double kRayEpsilon = 1e-8;

template <typename Scalar>
struct CameraIntrinsics {
  Scalar f{1};
  Scalar cx{0};
  Scalar cy{0};

  [[nodiscard]] bool valid() const noexcept {
    return std::isfinite(f) && std::isfinite(cx) && std::isfinite(cy) && f > Scalar(0);
  }

  void validate() const {
    if (!valid()) throw Error(ErrorKind::InvalidInput, "camera intrinsics require finite values and f > 0");
  }

  /// Direction K^-1 (u, v, 1): unit depth along the optical axis.
  [[nodiscard]] Point3<Scalar> ray(Scalar u, Scalar v) const noexcept {
    return {(u - cx) / f, (v - cy) / f, Scalar(1)};
  }

  [[nodiscard]] Eigen::Matrix<Scalar, 3, 3> matrix() const {
    Eigen::Matrix<Scalar, 3, 3> k;
    k << f, 0, cx, 0, f, cy, 0, 0, 1;
    return k;
  }
};

template <typename Scalar>
struct PixelDepth {
  Scalar u{0};  // column
  Scalar v{0};  // row
  Scalar depth{0};
};

/// Plane n.X + offset = 0 with ||n|| = 1.
///
/// Orientation is canonical: n_z > 0, or n_z == 0 and n_y > 0, or n_z == n_y == 0
/// and n_x > 0. Two planes describing the same point set therefore compare equal
/// component-wise.
template <typename Scalar>
class Plane {
 public:
  using Vector3 = Point3<Scalar>;
  using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

  Plane() = default;

  /// From general-form coefficients a X + b Y + c Z + d = 0.
  static Plane from_coefficients(const Vector4& abcd) {
    const Vector3 n = abcd.template head<3>();
    const Scalar norm = n.norm();
    if (!(norm > Scalar(0)) || !std::isfinite(norm) || !std::isfinite(abcd(3)))
      throw Error(ErrorKind::InvalidInput, "plane coefficients need a finite nonzero normal");
    return Plane(n / norm, abcd(3) / norm);
  }

  static Plane from_normal_offset(const Vector3& normal, Scalar offset) {
    Vector4 abcd;
    abcd << normal, offset;
    return from_coefficients(abcd);
  }

  /// Plane with the given normal direction passing through `point`.
  static Plane through_point(const Vector3& normal, const Vector3& point) {
    const Vector3 n = normal.normalized();
    return from_normal_offset(n, -n.dot(point));
  }

  /// Plane orthogonal to the optical axis at depth z.
  static Plane front_parallel(Scalar z) { return Plane(Vector3::UnitZ(), -z); }

  [[nodiscard]] const Vector3& normal() const noexcept { return normal_; }
  [[nodiscard]] Scalar offset() const noexcept { return offset_; }

  [[nodiscard]] Vector4 coefficients() const {
    Vector4 abcd;
    abcd << normal_, offset_;
    return abcd;
  }

  [[nodiscard]] Scalar signed_distance(const Vector3& p) const noexcept { return normal_.dot(p) + offset_; }

  friend bool operator==(const Plane& a, const Plane& b) noexcept {
    return a.normal_ == b.normal_ && a.offset_ == b.offset_;
  }

 private:
  Plane(const Vector3& unit_normal, Scalar offset) : normal_(unit_normal), offset_(offset) { canonicalize(); }

  void canonicalize() noexcept {
    const bool flip = normal_.z() < 0 || (normal_.z() == 0 && normal_.y() < 0) ||
                      (normal_.z() == 0 && normal_.y() == 0 && normal_.x() < 0);
    if (flip) {
      normal_ = -normal_;
      offset_ = -offset_;
    }
  }

  Vector3 normal_ = Vector3::UnitZ();
  Scalar offset_{-1};
};

using Planed = Plane<double>;
using Intrinsicsd = CameraIntrinsics<double>;
using Point3d = Point3<double>;
using PixelDepthd = PixelDepth<double>;

template <typename Scalar>
Point3<Scalar> backproject(const PixelDepth<Scalar>& p, const CameraIntrinsics<Scalar>& k) {
  if (!std::isfinite(p.u) || !std::isfinite(p.v) || !std::isfinite(p.depth) || !k.valid())
    throw Error(ErrorKind::InvalidInput, "backproject needs finite pixel, depth and valid intrinsics");
  return k.ray(p.u, p.v) * p.depth;
}

/// Depth where `ray` (with unit z component) meets the plane. NaN when the ray
/// is parallel to the plane. Non-positive results mean the plane lies behind
/// the camera along that ray.
template <typename Scalar>
Scalar depth_along_ray(const Plane<Scalar>& s, const Point3<Scalar>& ray) noexcept {
  const Scalar den = s.normal().dot(ray);
  if (!(std::abs(den) > Scalar(kRayEpsilon))) return std::numeric_limits<Scalar>::quiet_NaN();
  return -s.offset() / den;
}

template <typename Scalar>
Scalar plane_depth_at(const Plane<Scalar>& s, Scalar u, Scalar v, const CameraIntrinsics<Scalar>& k) {
  const Scalar den = s.normal().dot(k.ray(u, v));
  if (!(std::abs(den) > Scalar(kRayEpsilon)))
    throw Error(ErrorKind::DegenerateRay, "pixel ray is parallel to the plane");
  return -s.offset() / den;
}

template <typename Scalar>
Scalar point_plane_distance(const Point3<Scalar>& p, const Plane<Scalar>& s) noexcept {
  return std::abs(s.signed_distance(p));
}

/// Total least squares plane: normal along the smallest-variance direction of
/// the point scatter.
template <typename Scalar>
Plane<Scalar> fit_plane_lsq(std::span<const Point3<Scalar>> points) {
  using Vector3 = Point3<Scalar>;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  if (points.size() < 3) throw Error(ErrorKind::RankDeficient, "plane fit needs at least 3 points");

  Vector3 centroid = Vector3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= Scalar(points.size());

  Matrix3 scatter = Matrix3::Zero();
  for (const auto& p : points) {
    const Vector3 q = p - centroid;
    scatter.noalias() += q * q.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Matrix3> es(scatter);
  const Vector3 ev = es.eigenvalues();  // ascending
  if (!(ev(2) > Scalar(0)) || ev(1) <= Scalar(1e-12) * ev(2))
    throw Error(ErrorKind::RankDeficient, "points are collinear or coincident");

  return Plane<Scalar>::through_point(es.eigenvectors().col(0), centroid);
}

template <typename Scalar>
Plane<Scalar> fit_plane_lsq(const std::vector<Point3<Scalar>>& points) {
  return fit_plane_lsq(std::span<const Point3<Scalar>>(points));
}

template <typename Scalar>
struct RansacResult {
  Plane<Scalar> plane;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

/// Seeded RANSAC over 3-point hypotheses; the best hypothesis is refit on its
/// inliers and the mask is recomputed against the refit plane.
template <typename Scalar>
RansacResult<Scalar> ransac_plane(std::span<const Point3<Scalar>> points, Scalar inlier_tol, int iters,
                                  std::uint64_t seed) {
  using Vector3 = Point3<Scalar>;
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorKind::NoConsensus, "RANSAC needs at least 3 points");
  if (!(inlier_tol > Scalar(0)) || iters < 1)
    throw Error(ErrorKind::InvalidInput, "RANSAC needs a positive tolerance and iteration count");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::size_t best_count = 0;
  Plane<Scalar> best;
  for (int it = 0; it < iters; ++it) {
    const std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    std::size_t i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    const Vector3 cross = (points[i1] - points[i0]).cross(points[i2] - points[i0]);
    const Scalar norm = cross.norm();
    if (!(norm > Scalar(1e-12))) continue;
    const auto hyp = Plane<Scalar>::through_point(cross / norm, points[i0]);

    std::size_t count = 0;
    for (const auto& p : points) count += point_plane_distance(p, hyp) <= inlier_tol;
    if (count > best_count) {
      best_count = count;
      best = hyp;
    }
  }
  if (best_count < 3) throw Error(ErrorKind::NoConsensus, "no 3-point hypothesis gathered 3 inliers");

  std::vector<Vector3> inlier_points;
  inlier_points.reserve(best_count);
  for (const auto& p : points)
    if (point_plane_distance(p, best) <= inlier_tol) inlier_points.push_back(p);

  RansacResult<Scalar> result;
  result.plane = fit_plane_lsq(std::span<const Vector3>(inlier_points));
  result.inliers.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.inliers[i] = point_plane_distance(points[i], result.plane) <= inlier_tol;
    result.inlier_count += result.inliers[i];
  }
  if (result.inlier_count < 3) {
    // Refit drifted away from a thin consensus set; keep the hypothesis.
    result.plane = best;
    result.inlier_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      result.inliers[i] = point_plane_distance(points[i], best) <= inlier_tol;
      result.inlier_count += result.inliers[i];
    }
  }
  return result;
}

template <typename Scalar>
RansacResult<Scalar> ransac_plane(const std::vector<Point3<Scalar>>& points, Scalar inlier_tol, int iters,
                                  std::uint64_t seed) {
  return ransac_plane(std::span<const Point3<Scalar>>(points), inlier_tol, iters, seed);
}

}  // namespace planedepth
