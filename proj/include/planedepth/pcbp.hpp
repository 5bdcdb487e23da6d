#pragma once

// Particle-based continuous optimization of the per-superpixel planes: each
// outer iteration proposes a few candidate planes per superpixel, scores them
// with the CRF energy and picks one per superpixel with TRW-S.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planedepth/energy.hpp"
#include "planedepth/geometry.hpp"
#include "planedepth/image.hpp"
#include "planedepth/segmentation.hpp"

namespace planedepth {

enum class Mode { Planar, Cardboard };

const char* to_string(Mode mode) noexcept;
/// Parses "planar" or "cardboard"; throws Error(InvalidInput) otherwise.
Mode parse_mode(const std::string& text);

struct SolverConfig {
  Mode mode = Mode::Planar;
  int num_particles = 10;
  int iterations = 40;
  Eigen::Vector4d sigma{0.02, 0.02, 0.02, 0.2};  // planar proposal std on (a, b, c, d)
  double sigma_depth = 0.5;                      // cardboard proposal std on depth, meters
  double decay = 0.9;                            // proposal std shrinks by this factor per iteration
  int trws_iters = 30;
  double trws_tolerance = 1e-5;                  // relative bound gain or duality gap that ends the inner solve
  double epsilon = 0.2;                          // road threshold, meters (cardboard init)
  std::uint64_t seed = 0;

  /// Default iteration and particle counts for each mode.
  static SolverConfig defaults(Mode mode);

  void validate() const;
};

/// Per superpixel, the candidate planes of one outer iteration. Slot 0 is the
/// incumbent.
using ParticleSet = std::vector<std::vector<Planed>>;

/// Fixed geometry of the cardboard model: one road plane and a common normal
/// for every object plane.
struct CardboardModel {
  Planed road;
  Point3d object_normal;
  std::vector<Point3d> centroid_rays;   // per superpixel, z = 1
  std::vector<double> fallback_depth;   // mean dense0 depth per superpixel

  /// Throws Error(InvalidRoadPlane) when the road normal has no y component.
  static CardboardModel make(const SuperpixelGraph& graph, const Planed& road, const Intrinsicsd& k,
                             const DenseDepth& dense0);

  /// Object plane with the shared normal through the centroid ray of `node` at `depth`.
  [[nodiscard]] Planed object_plane(int node, double depth) const;
  [[nodiscard]] bool is_object(const Planed& s) const noexcept { return s.normal() == object_normal; }
};

/// Slot 0 incumbent, floor(n_p / 2) slots of Gaussian perturbations of the
/// incumbent's (a, b, c, d) renormalized to a unit normal, and the rest filled
/// with neighbour incumbents in ascending id order, cycling. A superpixel with
/// no neighbours gets perturbations in those slots too.
ParticleSet sample_particles_planar(std::span<const Planed> incumbents, const SuperpixelGraph& graph,
                                    const Eigen::Vector4d& sigma, std::uint64_t seed, int num_particles);

/// Slot 0 incumbent, slot 1 the road plane, ceil((n_p - 2) / 2) object planes
/// at the incumbent's centroid depth plus Gaussian noise (clamped to at least
/// 0.1 m), and the rest neighbour incumbents as in planar mode.
ParticleSet sample_particles_cardboard(std::span<const Planed> incumbents, const CardboardModel& model,
                                       const SuperpixelGraph& graph, double sigma_depth, std::uint64_t seed,
                                       int num_particles);

struct Labeling {
  Mode mode = Mode::Planar;
  std::vector<int> particle;  // chosen slot per superpixel in the last iteration
  std::vector<bool> road;     // cardboard only: superpixel assigned the road plane
};

struct TraceRow {
  int iteration;
  double unary;
  double total;
};

struct PcbpResult {
  std::vector<Planed> planes;
  Labeling labeling;
  std::vector<TraceRow> trace;  // one row per outer iteration, energies of the kept state
  EnergyBreakdown initial;
  EnergyBreakdown final;
  int accepted = 0;  // iterations whose candidate replaced the incumbent
};

struct PcbpProblem {
  const SuperpixelGraph& graph;
  const std::vector<std::vector<PixelDepthd>>& samples;  // by superpixel
  Intrinsicsd k;
  EnergyParams params;
};

/// Runs config.iterations rounds of sample -> score -> TRW-S. A candidate
/// state is kept only if its total energy does not exceed the incumbent's, so
/// the trace is non-increasing. Cardboard mode requires `model`; every
/// initial plane must then be the road plane or an object plane.
PcbpResult pcbp_run(const PcbpProblem& problem, const SolverConfig& config, std::vector<Planed> init,
                    const std::optional<CardboardModel>& model = std::nullopt);

/// Per-pixel depth of each superpixel's plane. Pixels where the plane gives
/// no positive depth take the median of the region's feasible depths, then
/// `fallback` (if non-empty), else stay invalid.
DenseDepth render_depth(std::span<const Planed> state, const SuperpixelGraph& graph, const Intrinsicsd& k,
                        const DenseDepth& fallback = {});

/// Road-labeled superpixels as a 0/1 mask. Throws Error(ModeMismatch) for planar labelings.
MaskGrid free_space_mask(const Labeling& labeling, const SuperpixelGraph& graph);

/// "iteration,unary_energy,total_energy" followed by one line per row.
std::string format_trace_csv(std::span<const TraceRow> trace);

}  // namespace planedepth
