#include "planedepth/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "planedepth/interp.hpp"

namespace planedepth {

Planed SyntheticScene::object_plane(double z) const {
  return Planed::through_point(object_plane_normal(road), Point3d(0.0, 0.0, z));
}

SyntheticScene SyntheticScene::street(bool with_shadows) {
  SyntheticScene s;
  // Column extents for metric widths at the given depth.
  const auto cols = [&s](double x0, double x1, double z) {
    return std::pair<int, int>{static_cast<int>(std::lround(s.k.cx + s.k.f * x0 / z)),
                               static_cast<int>(std::lround(s.k.cx + s.k.f * x1 / z))};
  };
  const auto row = [&s](double y, double z) { return static_cast<int>(std::lround(s.k.cy + s.k.f * y / z)); };

  s.objects.push_back({s.object_plane(40.0), {0, 0, s.width, s.height}, {150, 180, 210}});
  const auto [a0, a1] = cols(-5.5, -1.5, 12.0);
  s.objects.push_back({s.object_plane(12.0), {a0, row(-0.2, 12.0), a1, s.height}, {170, 60, 50}});
  const auto [b0, b1] = cols(1.0, 5.0, 20.0);
  s.objects.push_back({s.object_plane(20.0), {b0, row(-1.5, 20.0), b1, s.height}, {60, 140, 70}});

  if (with_shadows) {
    s.shadows = {{120, 200, 45, 14}, {330, 215, 60, 12}, {520, 190, 40, 10}, {250, 150, 35, 7}, {430, 120, 50, 6}};
  }
  return s;
}

SyntheticFrame generate_synthetic(const SyntheticScene& scene) {
  const int w = scene.width, h = scene.height;
  if (w <= 0 || h <= 0) throw Error(ErrorKind::InvalidScene, "scene size must be positive");
  scene.k.validate();

  SyntheticFrame out;
  DenseDepth gt(w, h);
  out.road_mask = MaskGrid::Zero(h, w);
  RgbImage image(w, h);
  std::mt19937_64 rng(scene.texture_seed);
  std::uniform_real_distribution<double> jitter(-scene.noise, scene.noise);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Point3d ray = scene.k.ray(u, v);
      double best = depth_along_ray(scene.road, ray);
      if (!(best > 0.0)) best = std::numeric_limits<double>::infinity();
      const Rgb* color = std::isfinite(best) ? &scene.road_color : nullptr;
      bool road = std::isfinite(best);
      for (const auto& obj : scene.objects) {
        if (!obj.extent.contains(u, v)) continue;
        const double z = depth_along_ray(obj.plane, ray);
        if (z > 0.0 && z < best) {
          best = z;
          color = &obj.color;
          road = false;
        }
      }
      if (!color)
        throw Error(ErrorKind::InvalidScene,
                    "pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") sees no plane in front of the camera");
      gt.depth(v, u) = best;
      out.road_mask(v, u) = road ? 1 : 0;

      double shade = 1.0;
      if (road)
        for (const auto& s : scene.shadows) {
          const double du = (u - s.cu) / s.ru, dv = (v - s.cv) / s.rv;
          if (du * du + dv * dv <= 1.0) shade = std::min(shade, s.darken);
        }
      std::uint8_t* px = image.at(u, v);
      for (int c = 0; c < 3; ++c) {
        // Noise is drawn for every pixel so textures do not shift the stream.
        const double value = (*color)[c] * shade + jitter(rng);
        px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
      }
    }
  }

  out.frame.image = std::move(image);
  out.frame.k = scene.k;
  out.frame.sparse = sparsify(gt, scene.h_factor, scene.v_factor);
  out.frame.gt = std::move(gt);
  return out;
}

}  // namespace planedepth
