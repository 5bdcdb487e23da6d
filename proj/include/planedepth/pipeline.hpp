#pragma once

// End-to-end completion of one frame and the plain-text configuration that
// drives it.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "planedepth/energy.hpp"
#include "planedepth/interp.hpp"
#include "planedepth/io.hpp"
#include "planedepth/pcbp.hpp"
#include "planedepth/segmentation.hpp"

namespace planedepth {

struct PipelineConfig {
  Mode mode = Mode::Planar;
  EnergyParams energy;
  SolverConfig solver;      // mode, iterations and seed are kept in sync by resolve()
  int superpixels = 0;      // 0 picks the mode default (800 planar, 1200 cardboard)
  int iterations = -1;      // -1 picks the mode default (40 planar, 20 cardboard)
  double compactness = 10.0;
  int slic_iters = 10;
  double lambda = 1.0;
  bool pls_robust = true;
  double d_th = 3.0;
  int crop_height = 200;    // KITTI frames only; 0 keeps the full image
  int h_factor = 1;         // extra lattice sparsification of the input samples
  int v_factor = 1;
  double ransac_tol = 0.15;
  int ransac_iters = 500;
  std::uint64_t seed = 0;

  /// Copy with mode defaults filled in and shared fields propagated.
  [[nodiscard]] PipelineConfig resolve() const;
  void validate() const;
};

/// One configurable key: its name, help text, and string accessors.
struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<ConfigField>& config_fields();

/// Applies `key = value` lines; '#' starts a comment. Unknown keys and
/// malformed values raise Error(Parse) naming the line.
void apply_config_text(PipelineConfig& config, const std::string& text, const std::string& origin = "config");
PipelineConfig load_config(const std::filesystem::path& path);
/// Every key with its effective value, in `key = value` form.
std::string format_config(const PipelineConfig& config);

struct StageTimes {
  double segment = 0.0;
  double interpolate = 0.0;
  double initialize = 0.0;
  double inference = 0.0;
  double render = 0.0;

  [[nodiscard]] double total() const noexcept { return segment + interpolate + initialize + inference + render; }
};

struct CompletionResult {
  SuperpixelGraph graph;
  DenseDepth dense0;
  std::vector<Planed> init;
  PcbpResult pcbp;
  DenseDepth depth;
  std::optional<Planed> road;
  std::optional<MaskGrid> free_space;
  StageTimes times;  // seconds
};

/// RANSAC road plane from the back-projected samples below the camera centre
/// (Y > 0). Throws Error(InvalidRoadPlane) if the best plane is far from
/// horizontal (|n_y| < 0.8).
Planed estimate_road_plane(const SparseDepth& sparse, const Intrinsicsd& k, double tol, int iters,
                           std::uint64_t seed);

CompletionResult run_complete(const FrameBundle& frame, const PipelineConfig& config);

}  // namespace planedepth
