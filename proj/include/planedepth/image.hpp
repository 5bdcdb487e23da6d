#pragma once

// Raster containers shared by every stage. Grids are row-major Eigen arrays
// indexed (row, col) = (v, u), so linear index v * width + u matches memory.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "planedepth/geometry.hpp"

namespace planedepth {

template <typename T>
using Grid = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using LabelGrid = Grid<std::int32_t>;
using MaskGrid = Grid<std::uint8_t>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  [[nodiscard]] bool empty() const noexcept { return width <= 0 || height <= 0; }
  std::uint8_t* at(int u, int v) { return &data[(static_cast<std::size_t>(v) * width + u) * 3]; }
  [[nodiscard]] const std::uint8_t* at(int u, int v) const {
    return &data[(static_cast<std::size_t>(v) * width + u) * 3];
  }
};

/// Dense depth in meters; 0 marks an invalid pixel.
struct DenseDepth {
  Grid<double> depth;

  DenseDepth() = default;
  DenseDepth(int width, int height) : depth(Grid<double>::Zero(height, width)) {}

  [[nodiscard]] int width() const noexcept { return static_cast<int>(depth.cols()); }
  [[nodiscard]] int height() const noexcept { return static_cast<int>(depth.rows()); }
  [[nodiscard]] bool valid(int u, int v) const noexcept {
    const double d = depth(v, u);
    return std::isfinite(d) && d > 0.0;
  }
  [[nodiscard]] std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < depth.size(); ++i) n += std::isfinite(depth(i)) && depth(i) > 0.0;
    return n;
  }
};

/// Irregular depth measurements at integer pixel positions, one per pixel,
/// kept in raster order.
class SparseDepth {
 public:
  SparseDepth() = default;

  /// Validates bounds and depths; duplicate pixels are averaged.
  static SparseDepth from_samples(int width, int height, std::vector<PixelDepthd> samples);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] const std::vector<PixelDepthd>& samples() const noexcept { return samples_; }
  [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }

  [[nodiscard]] DenseDepth to_dense() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<PixelDepthd> samples_;
};

}  // namespace planedepth
