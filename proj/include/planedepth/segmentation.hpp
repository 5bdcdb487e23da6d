#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "planedepth/image.hpp"

namespace planedepth {

/// Unordered superpixel pair stored as (min, max).
using SegmentPair = std::pair<int, int>;

struct Adjacency {
  std::vector<SegmentPair> pairs;                 // sorted lexicographically
  std::vector<std::vector<std::int32_t>> boundaries;  // parallel to `pairs`; sorted linear pixel indices
};

/// Superpixel over-segmentation with its region adjacency graph.
///
/// A pixel of region i belongs to the boundary of (i, j) when one of its
/// 4-neighbours lies in region j; pixels from both sides are included.
struct SuperpixelGraph {
  LabelGrid labels;
  std::vector<std::vector<std::int32_t>> regions;  // linear pixel indices per segment, ascending
  std::vector<SegmentPair> adjacency;
  std::vector<std::vector<std::int32_t>> boundaries;
  std::vector<std::vector<int>> neighbors;  // ascending ids

  [[nodiscard]] int width() const noexcept { return static_cast<int>(labels.cols()); }
  [[nodiscard]] int height() const noexcept { return static_cast<int>(labels.rows()); }
  [[nodiscard]] int size() const noexcept { return static_cast<int>(regions.size()); }

  /// Index into `adjacency`/`boundaries`, or -1 when i and j are not adjacent.
  [[nodiscard]] int edge_index(int i, int j) const;

  /// Builds regions and adjacency from a label grid whose labels are 0..S-1.
  static SuperpixelGraph from_labels(LabelGrid labels);
};

Adjacency build_adjacency(const LabelGrid& labels);

struct SlicParams {
  int target_count = 800;
  double compactness = 10.0;
  int max_iters = 10;
};

/// SLIC in CIELAB + xy space, seeded on a regular grid, followed by
/// connectivity enforcement that merges components smaller than a quarter of
/// the nominal superpixel area into their largest neighbour.
SuperpixelGraph slic_segment(const RgbImage& image, const SlicParams& params);

/// Relabels every 4-connected component separately and merges components
/// with fewer than `min_size` pixels into the largest adjacent component.
/// Labels of the result are contiguous and ordered by first pixel in raster order.
LabelGrid enforce_connectivity(const LabelGrid& labels, int min_size);

}  // namespace planedepth
