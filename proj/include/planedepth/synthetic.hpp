#pragma once

// Procedural street scenes with exact ground truth: a road plane, upright
// object planes occluding it, and colour-only road markings.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "planedepth/geometry.hpp"
#include "planedepth/image.hpp"
#include "planedepth/io.hpp"

namespace planedepth {

using Rgb = std::array<std::uint8_t, 3>;

struct PixelRect {
  int u0, v0, u1, v1;  // half-open [u0, u1) x [v0, v1)

  [[nodiscard]] bool contains(int u, int v) const noexcept { return u >= u0 && u < u1 && v >= v0 && v < v1; }
};

struct SceneObject {
  Planed plane;
  PixelRect extent;  // where the object exists in the image
  Rgb color;
};

/// Dark elliptical patch painted on road pixels only; no depth change.
struct ShadowPatch {
  double cu, cv, ru, rv;  // centre and radii in pixels
  double darken = 0.45;   // colour multiplier
};

struct SyntheticScene {
  int width = 640;
  int height = 240;
  Intrinsicsd k{400.0, 320.0, 20.0};
  Planed road = Planed::from_normal_offset(Point3d::UnitY(), -1.65);  // Y = 1.65 m below the camera
  Rgb road_color{110, 110, 115};
  std::vector<SceneObject> objects;
  std::vector<ShadowPatch> shadows;
  double noise = 6.0;  // uniform colour noise amplitude
  std::uint64_t texture_seed = 1;
  int h_factor = 6;
  int v_factor = 3;

  /// Road, a far wall at 40 m and boxes at 12 m and 20 m; optionally five
  /// shadow patches on the road.
  static SyntheticScene street(bool with_shadows = false);

  /// Upright object plane (normal orthogonal to the road) at depth z on the optical axis.
  [[nodiscard]] Planed object_plane(double z) const;
};

struct SyntheticFrame {
  FrameBundle frame;  // gt always set
  MaskGrid road_mask;
};

/// Per pixel, the nearest plane with positive depth among the road and the
/// objects whose extent contains the pixel. Throws Error(InvalidScene) when a
/// pixel sees no plane in front of the camera.
SyntheticFrame generate_synthetic(const SyntheticScene& scene);

}  // namespace planedepth
