#include "planedepth/pcbp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "planedepth/interp.hpp"
#include "planedepth/trws.hpp"

namespace planedepth {

namespace {

constexpr double kMinObjectDepth = 0.1;
// Depth sentinels for infeasible boundary pixels: any difference involving
// one exceeds every truncation threshold.
constexpr double kFarLeft = 1e30, kFarRight = -1e30;

std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return std::mt19937_64(seq);
}

void fill_neighbor_slots(std::vector<Planed>& slots, std::size_t first, int node, std::span<const Planed> incumbents,
                         const SuperpixelGraph& graph) {
  const auto& nb = graph.neighbors[node];
  for (std::size_t s = first, c = 0; s < slots.size(); ++s, ++c) slots[s] = incumbents[nb[c % nb.size()]];
}

void check_particle_inputs(std::span<const Planed> incumbents, const SuperpixelGraph& graph, int num_particles,
                           int minimum) {
  if (incumbents.size() != static_cast<std::size_t>(graph.size()))
    throw Error(ErrorKind::InvalidInput, "one incumbent plane per superpixel is required");
  if (num_particles < minimum) throw Error(ErrorKind::InvalidInput, "too few particles per superpixel");
}

Planed perturb_plane(const Planed& s, const Eigen::Vector4d& sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Vector4d c = s.coefficients();
  for (int q = 0; q < 4; ++q) c(q) += sigma(q) * g(rng);
  if (c.head<3>().norm() < 1e-12) return s;
  return Planed::from_coefficients(c);
}

// Boundary rays of one adjacency edge as a 3 x B matrix.
struct EdgeGeometry {
  Eigen::Matrix3Xd rays;
  // Cardboard fast path: inverse ray projections w = 1 / (n_o . r) sorted
  // ascending with prefix sums, and the count of rays along which object
  // planes have no positive depth.
  std::vector<double> weights;
  std::vector<double> prefix;
  int blind = 0;
  // The road plane never changes during a run, so its boundary depths (with
  // the side's sentinel) and the object normal's ray projections are cached.
  Eigen::RowVectorXd object_dots;
  Eigen::RowVectorXd road_left, road_right;
};

double ray_depth(double offset, double den, double sentinel) {
  const double z = std::abs(den) > kRayEpsilon ? -offset / den : -1.0;
  return z > 0.0 ? z : sentinel;
}

// Sum over boundary rays of min(|delta| * w, tau) for object planes sharing
// the model normal, plus tau for every blind ray.
double object_pair_cost(const EdgeGeometry& g, double delta, double tau) {
  const double a = std::abs(delta);
  const auto count = static_cast<std::ptrdiff_t>(g.weights.size());
  std::ptrdiff_t cut = count;
  if (a > 0.0) cut = std::upper_bound(g.weights.begin(), g.weights.end(), tau / a) - g.weights.begin();
  return a * g.prefix[cut] + tau * static_cast<double>(count - cut + g.blind);
}

class Solver {
 public:
  Solver(const PcbpProblem& problem, const std::optional<CardboardModel>& model) : p_(problem), model_(model) {
    const auto& graph = p_.graph;
    const int w = graph.width();
    edges_.resize(graph.adjacency.size());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& boundary = graph.boundaries[e];
      auto& g = edges_[e];
      g.rays.resize(3, static_cast<Eigen::Index>(boundary.size()));
      for (std::size_t b = 0; b < boundary.size(); ++b)
        g.rays.col(static_cast<Eigen::Index>(b)) = p_.k.ray(boundary[b] % w, boundary[b] / w);
      if (model_) {
        const Point3d n = model_->object_normal;
        for (Eigen::Index b = 0; b < g.rays.cols(); ++b) {
          const double dot = n.dot(g.rays.col(b));
          if (dot > kRayEpsilon)
            g.weights.push_back(1.0 / dot);
          else
            ++g.blind;
        }
        g.object_dots = n.transpose() * g.rays;
        const Eigen::RowVectorXd road_dots = model_->road.normal().transpose() * g.rays;
        g.road_left.resize(g.rays.cols());
        g.road_right.resize(g.rays.cols());
        for (Eigen::Index b = 0; b < g.rays.cols(); ++b) {
          g.road_left(b) = ray_depth(model_->road.offset(), road_dots(b), kFarLeft);
          g.road_right(b) = ray_depth(model_->road.offset(), road_dots(b), kFarRight);
        }
        std::sort(g.weights.begin(), g.weights.end());
        g.prefix.assign(g.weights.size() + 1, 0.0);
        for (std::size_t b = 0; b < g.weights.size(); ++b) g.prefix[b + 1] = g.prefix[b] + g.weights[b];
      }
    }
  }

  // Builds the discrete problem over `particles` (already deduplicated).
  PairwiseMrf build(const ParticleSet& particles) const {
    const auto& graph = p_.graph;
    const auto& params = p_.params;
    PairwiseMrf mrf;
    for (int i = 0; i < graph.size(); ++i) {
      Eigen::VectorXd u(static_cast<Eigen::Index>(particles[i].size()));
      for (std::size_t a = 0; a < particles[i].size(); ++a)
        u(static_cast<Eigen::Index>(a)) = data_term(particles[i][a], p_.samples[i], p_.k, params.theta1);
      mrf.add_node(std::move(u));
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [i, j] = graph.adjacency[e];
      mrf.add_edge(i, j, edge_costs(edges_[e], particles[i], particles[j]));
    }
    return mrf;
  }

 private:
  Eigen::MatrixXd edge_costs(const EdgeGeometry& g, const std::vector<Planed>& pi,
                             const std::vector<Planed>& pj) const {
    const auto& params = p_.params;
    const auto li = static_cast<Eigen::Index>(pi.size()), lj = static_cast<Eigen::Index>(pj.size());
    const Eigen::Index nb = g.rays.cols();
    Eigen::MatrixXd cost(li, lj);

    std::vector<bool> obj_i(pi.size(), false), obj_j(pj.size(), false);
    if (model_) {
      for (std::size_t a = 0; a < pi.size(); ++a) obj_i[a] = model_->is_object(pi[a]);
      for (std::size_t b = 0; b < pj.size(); ++b) obj_j[b] = model_->is_object(pj[b]);
    }
    // Boundary depths per particle, computed lazily for pairs off the fast path.
    Eigen::MatrixXd di, dj;
    Eigen::RowVectorXd dots(nb);
    const auto depths = [&](const std::vector<Planed>& ps, const std::vector<bool>& obj, double sentinel) {
      const Eigen::RowVectorXd& road = sentinel == kFarLeft ? g.road_left : g.road_right;
      Eigen::MatrixXd d(static_cast<Eigen::Index>(ps.size()), nb);
      for (std::size_t a = 0; a < ps.size(); ++a) {
        const auto row = static_cast<Eigen::Index>(a);
        if (model_ && ps[a] == model_->road) {
          d.row(row) = road;
          continue;
        }
        if (!obj[a]) dots.noalias() = ps[a].normal().transpose() * g.rays;
        const Eigen::RowVectorXd& den = obj[a] ? g.object_dots : dots;
        for (Eigen::Index b = 0; b < nb; ++b) d(row, b) = ray_depth(ps[a].offset(), den(b), sentinel);
      }
      return d;
    };

    for (Eigen::Index a = 0; a < li; ++a) {
      for (Eigen::Index b = 0; b < lj; ++b) {
        const Planed& sa = pi[a];
        const Planed& sb = pj[b];
        double depth_cost;
        if (obj_i[a] && obj_j[b]) {
          // Both planes share the object normal: depth ratio along every ray
          // is a constant offset difference scaled by 1 / (n . r).
          if (!(sa.offset() < 0.0) || !(sb.offset() < 0.0))
            depth_cost = params.tau1 * static_cast<double>(nb);
          else
            depth_cost = object_pair_cost(g, sb.offset() - sa.offset(), params.tau1);
        } else {
          if (di.size() == 0 && nb > 0) {
            di = depths(pi, obj_i, kFarLeft);
            dj = depths(pj, obj_j, kFarRight);
          }
          depth_cost = nb > 0 ? (di.row(a) - dj.row(b)).cwiseAbs().cwiseMin(params.tau1).sum() : 0.0;
        }
        cost(a, b) = params.theta2 * depth_cost + params.theta3 * smoothness_orient(sa, sb, params.tau2);
      }
    }
    return cost;
  }

  const PcbpProblem& p_;
  const std::optional<CardboardModel>& model_;
  std::vector<EdgeGeometry> edges_;
};

}  // namespace

const char* to_string(Mode mode) noexcept { return mode == Mode::Planar ? "planar" : "cardboard"; }

Mode parse_mode(const std::string& text) {
  if (text == "planar") return Mode::Planar;
  if (text == "cardboard") return Mode::Cardboard;
  throw Error(ErrorKind::InvalidInput, "mode must be planar or cardboard, got '" + text + "'");
}

SolverConfig SolverConfig::defaults(Mode mode) {
  SolverConfig c;
  c.mode = mode;
  c.iterations = mode == Mode::Planar ? 40 : 20;
  return c;
}

void SolverConfig::validate() const {
  const int min_particles = mode == Mode::Planar ? 2 : 3;
  if (num_particles < min_particles) throw Error(ErrorKind::InvalidInput, "too few particles per superpixel");
  if (iterations < 0) throw Error(ErrorKind::InvalidInput, "iteration count must be non-negative");
  if (!(sigma.array() > 0.0).all() || !sigma.allFinite() || !(sigma_depth > 0.0) || !std::isfinite(sigma_depth))
    throw Error(ErrorKind::InvalidInput, "proposal deviations must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw Error(ErrorKind::InvalidInput, "decay must lie in (0, 1]");
  if (trws_iters < 1) throw Error(ErrorKind::InvalidInput, "at least one message-passing sweep is required");
  if (!(trws_tolerance >= 0.0)) throw Error(ErrorKind::InvalidInput, "inner tolerance must be non-negative");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidInput, "road threshold must be positive");
}

CardboardModel CardboardModel::make(const SuperpixelGraph& graph, const Planed& road, const Intrinsicsd& k,
                                    const DenseDepth& dense0) {
  if (dense0.width() != graph.width() || dense0.height() != graph.height())
    throw Error(ErrorKind::InvalidInput, "dense depth and segmentation sizes differ");
  k.validate();
  CardboardModel m;
  m.road = road;
  m.object_normal = Planed::through_point(object_plane_normal(road), Point3d::UnitZ()).normal();
  const int w = graph.width();
  for (const auto& region : graph.regions) {
    const Eigen::Vector2d c = region_centroid(region, w);
    m.centroid_rays.push_back(k.ray(c.x(), c.y()));
    double sum = 0.0;
    std::size_t count = 0;
    for (const std::int32_t p : region) {
      const double d = dense0.depth(p);
      if (d > 0.0 && std::isfinite(d)) {
        sum += d;
        ++count;
      }
    }
    if (count == 0) throw Error(ErrorKind::NoData, "superpixel without any valid initial depth");
    m.fallback_depth.push_back(sum / static_cast<double>(count));
  }
  return m;
}

Planed CardboardModel::object_plane(int node, double depth) const {
  return Planed::through_point(object_normal, centroid_rays[node] * depth);
}

ParticleSet sample_particles_planar(std::span<const Planed> incumbents, const SuperpixelGraph& graph,
                                    const Eigen::Vector4d& sigma, std::uint64_t seed, int num_particles) {
  check_particle_inputs(incumbents, graph, num_particles, 2);
  std::mt19937_64 rng = iteration_rng(seed, 0);
  const std::size_t n_p = static_cast<std::size_t>(num_particles);
  ParticleSet set(incumbents.size());
  for (int i = 0; i < graph.size(); ++i) {
    auto& slots = set[i];
    slots.assign(n_p, incumbents[i]);
    const std::size_t mcmc_end = graph.neighbors[i].empty() ? n_p : 1 + n_p / 2;
    for (std::size_t s = 1; s < mcmc_end; ++s) slots[s] = perturb_plane(incumbents[i], sigma, rng);
    if (mcmc_end < n_p) fill_neighbor_slots(slots, mcmc_end, i, incumbents, graph);
  }
  return set;
}

ParticleSet sample_particles_cardboard(std::span<const Planed> incumbents, const CardboardModel& model,
                                       const SuperpixelGraph& graph, double sigma_depth, std::uint64_t seed,
                                       int num_particles) {
  check_particle_inputs(incumbents, graph, num_particles, 3);
  if (model.centroid_rays.size() != incumbents.size())
    throw Error(ErrorKind::InvalidInput, "cardboard model built for a different segmentation");
  std::mt19937_64 rng = iteration_rng(seed, 1);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t n_p = static_cast<std::size_t>(num_particles);
  ParticleSet set(incumbents.size());
  for (int i = 0; i < graph.size(); ++i) {
    auto& slots = set[i];
    slots.assign(n_p, incumbents[i]);
    slots[1] = model.road;
    double base = model.fallback_depth[i];
    if (model.is_object(incumbents[i])) {
      const double z = depth_along_ray(incumbents[i], model.centroid_rays[i]);
      if (z > 0.0) base = z;
    }
    const std::size_t mcmc_end = graph.neighbors[i].empty() ? n_p : 2 + (n_p - 1) / 2;
    for (std::size_t s = 2; s < mcmc_end; ++s)
      slots[s] = model.object_plane(i, std::max(kMinObjectDepth, base + sigma_depth * g(rng)));
    if (mcmc_end < n_p) fill_neighbor_slots(slots, mcmc_end, i, incumbents, graph);
  }
  return set;
}

PcbpResult pcbp_run(const PcbpProblem& problem, const SolverConfig& config, std::vector<Planed> init,
                    const std::optional<CardboardModel>& model) {
  config.validate();
  const auto& graph = problem.graph;
  problem.params.validate();
  problem.k.validate();
  if (init.size() != static_cast<std::size_t>(graph.size()) || problem.samples.size() != init.size())
    throw Error(ErrorKind::InvalidInput, "state length must equal the superpixel count");
  const bool cardboard = config.mode == Mode::Cardboard;
  if (cardboard != model.has_value())
    throw Error(ErrorKind::ModeMismatch, "cardboard mode needs a road model and planar mode must not get one");
  if (cardboard) {
    if (model->centroid_rays.size() != init.size())
      throw Error(ErrorKind::InvalidInput, "cardboard model built for a different segmentation");
    for (const auto& s : init)
      if (!(s == model->road) && !model->is_object(s))
        throw Error(ErrorKind::InvalidInput, "cardboard state must hold road or object planes only");
  }

  PcbpResult result;
  result.planes = std::move(init);
  result.initial = total_energy(result.planes, graph, problem.samples, problem.k, problem.params);
  EnergyBreakdown current = result.initial;

  result.labeling.mode = config.mode;
  result.labeling.particle.assign(result.planes.size(), 0);
  const auto road_flags = [&] {
    std::vector<bool> flags;
    if (cardboard)
      for (const auto& s : result.planes) flags.push_back(s == model->road);
    return flags;
  };
  result.labeling.road = road_flags();

  const Solver solver(problem, model);
  TrwsOptions inner;
  inner.sweeps = config.trws_iters;
  inner.stop_tolerance = config.trws_tolerance;

  double scale = 1.0;
  for (int t = 1; t <= config.iterations; ++t) {
    const std::uint64_t seed = config.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(t));
    const ParticleSet particles =
        cardboard ? sample_particles_cardboard(result.planes, *model, graph, config.sigma_depth * scale, seed,
                                               config.num_particles)
                  : sample_particles_planar(result.planes, graph, config.sigma * scale, seed, config.num_particles);

    // Duplicate planes would only inflate the label sets.
    ParticleSet unique(particles.size());
    std::vector<std::vector<int>> slot_of(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
      for (std::size_t s = 0; s < particles[i].size(); ++s) {
        const auto& cand = particles[i][s];
        if (std::find(unique[i].begin(), unique[i].end(), cand) != unique[i].end()) continue;
        unique[i].push_back(cand);
        slot_of[i].push_back(static_cast<int>(s));
      }
    }

    const PairwiseMrf mrf = solver.build(unique);
    const TrwsResult solved = trws_solve(mrf, inner);

    std::vector<Planed> candidate(result.planes.size());
    for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] = unique[i][solved.labels[i]];
    const EnergyBreakdown e = total_energy(candidate, graph, problem.samples, problem.k, problem.params);
    if (e.total() <= current.total()) {
      result.planes = std::move(candidate);
      current = e;
      ++result.accepted;
      for (std::size_t i = 0; i < result.planes.size(); ++i)
        result.labeling.particle[i] = slot_of[i][solved.labels[i]];
    } else {
      std::fill(result.labeling.particle.begin(), result.labeling.particle.end(), 0);
    }
    result.trace.push_back({t, current.unary, current.total()});
    scale *= config.decay;
  }
  result.labeling.road = road_flags();
  result.final = current;
  return result;
}

DenseDepth render_depth(std::span<const Planed> state, const SuperpixelGraph& graph, const Intrinsicsd& k,
                        const DenseDepth& fallback) {
  if (state.size() != static_cast<std::size_t>(graph.size()))
    throw Error(ErrorKind::InvalidInput, "state length must equal the superpixel count");
  const bool has_fallback = fallback.depth.size() > 0;
  if (has_fallback && (fallback.width() != graph.width() || fallback.height() != graph.height()))
    throw Error(ErrorKind::InvalidInput, "fallback depth size differs from the segmentation");
  const int w = graph.width();
  DenseDepth out(w, graph.height());
  std::vector<double> feasible;
  std::vector<std::int32_t> holes;
  for (int i = 0; i < graph.size(); ++i) {
    feasible.clear();
    holes.clear();
    for (const std::int32_t p : graph.regions[i]) {
      const double z = depth_along_ray(state[i], k.ray(p % w, p / w));
      if (z > 0.0 && std::isfinite(z)) {
        out.depth(p) = z;
        feasible.push_back(z);
      } else {
        holes.push_back(p);
      }
    }
    if (holes.empty()) continue;
    double fill = 0.0;
    if (!feasible.empty()) {
      const auto mid = feasible.begin() + static_cast<std::ptrdiff_t>(feasible.size() / 2);
      std::nth_element(feasible.begin(), mid, feasible.end());
      fill = *mid;
      if (feasible.size() % 2 == 0) fill = 0.5 * (fill + *std::max_element(feasible.begin(), mid));
    }
    for (const std::int32_t p : holes) out.depth(p) = fill > 0.0 ? fill : (has_fallback ? fallback.depth(p) : 0.0);
  }
  return out;
}

MaskGrid free_space_mask(const Labeling& labeling, const SuperpixelGraph& graph) {
  if (labeling.mode != Mode::Cardboard)
    throw Error(ErrorKind::ModeMismatch, "free space is only defined for cardboard labelings");
  if (labeling.road.size() != static_cast<std::size_t>(graph.size()))
    throw Error(ErrorKind::InvalidInput, "labeling does not match the segmentation");
  MaskGrid mask = MaskGrid::Zero(graph.height(), graph.width());
  for (int i = 0; i < graph.size(); ++i)
    if (labeling.road[i])
      for (const std::int32_t p : graph.regions[i]) mask(p) = 1;
  return mask;
}

std::string format_trace_csv(std::span<const TraceRow> trace) {
  std::string out = "iteration,unary_energy,total_energy\n";
  char line[96];
  for (const auto& row : trace) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", row.iteration, row.unary, row.total);
    out += line;
  }
  return out;
}

}  // namespace planedepth
