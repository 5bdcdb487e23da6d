#pragma once

// File formats and frame plumbing: PNG rasters, KITTI velodyne scans and
// calibration, PLY point clouds, cropping and lattice sparsification.

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "planedepth/geometry.hpp"
#include "planedepth/image.hpp"

namespace planedepth {

struct FrameBundle {
  RgbImage image;
  SparseDepth sparse;
  Intrinsicsd k;
  std::optional<DenseDepth> gt;
};

// PNG. All readers throw Error(Io) on unreadable files and Error(Parse) on
// malformed content.
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const RgbImage& image, const std::filesystem::path& path);

/// 16-bit single channel, value = round(depth * 256), 0 = invalid. Throws
/// Error(Range) for depths that do not fit (above 65535 / 256 m).
void write_depth_png(const DenseDepth& depth, const std::filesystem::path& path);
DenseDepth read_depth_png(const std::filesystem::path& path);

/// 16-bit label map; throws Error(Range) for labels outside [0, 65535].
void write_label_png(const LabelGrid& labels, const std::filesystem::path& path);
LabelGrid read_label_png(const std::filesystem::path& path);

/// 8-bit mask, nonzero stored as 255.
void write_mask_png(const MaskGrid& mask, const std::filesystem::path& path);
MaskGrid read_mask_png(const std::filesystem::path& path);

/// Image with region boundaries painted red.
RgbImage boundary_overlay(const RgbImage& image, const LabelGrid& labels);

// KITTI.
struct VelodynePoint {
  float x, y, z, reflectance;
};

/// Little-endian float32 quadruples. Throws Error(Parse) with the byte offset
/// of a truncated or non-finite record.
std::vector<VelodynePoint> read_velodyne(const std::filesystem::path& path);
void write_velodyne(const std::vector<VelodynePoint>& points, const std::filesystem::path& path);

/// Projection and LiDAR-to-camera transform from a KITTI calibration file.
///
/// Accepted keys: P2 or P_rect_02 (3x4), Tr or Tr_velo_to_cam (3x4) or R (3x3)
/// with T (3), and optionally R0_rect or R_rect_00 (3x3). Missing required
/// keys raise Error(Calib).
struct KittiCalib {
  Eigen::Matrix<double, 3, 4> projection;
  Eigen::Matrix4d velo_to_cam;  // rectification folded in

  [[nodiscard]] Intrinsicsd intrinsics() const;
};

KittiCalib read_kitti_calib(const std::filesystem::path& path);
void write_kitti_calib(const KittiCalib& calib, const std::filesystem::path& path);

/// Projects LiDAR points to rounded pixel positions, dropping points behind
/// the camera or outside the image and keeping the nearest depth per pixel.
SparseDepth project_velodyne(const std::vector<VelodynePoint>& points, const KittiCalib& calib, int width, int height);

FrameBundle load_kitti_frame(const std::filesystem::path& image_path, const std::filesystem::path& velodyne_path,
                             const std::filesystem::path& calib_path);

/// Keeps the bottom `crop_height` rows, shifting c_y and sample rows.
FrameBundle crop_lower_half(const FrameBundle& bundle, int crop_height = 200);

/// Keeps samples on the lattice u % h_factor == 0 and v % v_factor == 0.
SparseDepth sparsify(const SparseDepth& sparse, int h_factor, int v_factor);
/// Samples valid dense pixels on the same lattice.
SparseDepth sparsify(const DenseDepth& dense, int h_factor, int v_factor);

/// One vertex per valid pixel, back-projected, coloured from the image;
/// pixels set in `road_mask` are tinted green.
void write_ply(const DenseDepth& depth, const RgbImage& image, const Intrinsicsd& k,
               const std::filesystem::path& path, const MaskGrid* road_mask = nullptr, bool binary = false);

/// Frame directory: image.png, sparse.png (depth PNG of the samples),
/// intrinsics.txt ("f cx cy") and, when present, gt.png.
void write_frame_dir(const FrameBundle& frame, const std::filesystem::path& dir);
FrameBundle read_frame_dir(const std::filesystem::path& dir);

}  // namespace planedepth
