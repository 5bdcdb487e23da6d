#include "planedepth/image.hpp"

#include <algorithm>
#include <cmath>

namespace planedepth {

SparseDepth SparseDepth::from_samples(int width, int height, std::vector<PixelDepthd> samples) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidInput, "sparse depth needs positive dimensions");
  for (const auto& s : samples) {
    if (!std::isfinite(s.u) || !std::isfinite(s.v) || s.u != std::floor(s.u) || s.v != std::floor(s.v))
      throw Error(ErrorKind::InvalidInput, "sample coordinates must be integral pixels");
    if (s.u < 0 || s.v < 0 || s.u >= width || s.v >= height)
      throw Error(ErrorKind::InvalidInput, "sample outside image bounds");
    if (!std::isfinite(s.depth) || !(s.depth > 0.0))
      throw Error(ErrorKind::InvalidInput, "sample depth must be finite and positive");
  }
  std::stable_sort(samples.begin(), samples.end(), [](const PixelDepthd& a, const PixelDepthd& b) {
    return a.v != b.v ? a.v < b.v : a.u < b.u;
  });

  SparseDepth out;
  out.width_ = width;
  out.height_ = height;
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < samples.size() && samples[j].u == samples[i].u && samples[j].v == samples[i].v) sum += samples[j++].depth;
    out.samples_.push_back({samples[i].u, samples[i].v, sum / static_cast<double>(j - i)});
    i = j;
  }
  return out;
}

DenseDepth SparseDepth::to_dense() const {
  DenseDepth d(width_, height_);
  for (const auto& s : samples_) d.depth(static_cast<int>(s.v), static_cast<int>(s.u)) = s.depth;
  return d;
}

}  // namespace planedepth
