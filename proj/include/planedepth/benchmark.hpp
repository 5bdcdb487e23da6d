#pragma once

// Batch evaluation over a list of KITTI frames.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "planedepth/metrics.hpp"
#include "planedepth/pipeline.hpp"

namespace planedepth {

struct BenchmarkFrame {
  std::string name;
  std::filesystem::path image;
  std::filesystem::path velodyne;
  std::filesystem::path calib;
  std::filesystem::path gt;  // 16-bit depth PNG at full image size
};

/// One frame per line: `image velodyne calib gt`, whitespace separated.
/// Relative paths resolve against the list file's directory; blank lines
/// and '#' comments are skipped. The reference protocol evaluates every
/// 10th frame of each sequence.
std::vector<BenchmarkFrame> read_frame_list(const std::filesystem::path& list);

/// Loads a listed frame with its ground truth and applies the crop.
FrameBundle load_benchmark_frame(const BenchmarkFrame& frame, int crop_height);

struct BenchmarkRow {
  std::string name;
  EvalReport report;
  StageTimes times;
};

struct BenchmarkSummary {
  std::vector<BenchmarkRow> rows;
  EvalReport mean;  // unweighted mean over frames; n_evaluated is the total
  double mean_seconds = 0.0;
};

/// Completes and scores every frame. When `out_dir` is set, each frame's
/// depth PNG is written there as `<name>.png`.
BenchmarkSummary run_benchmark(const std::vector<BenchmarkFrame>& frames, const PipelineConfig& config,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Per-frame CSV rows prefixed with the frame name, followed by a `mean` row.
std::string format_benchmark_csv(const BenchmarkSummary& summary);

}  // namespace planedepth
