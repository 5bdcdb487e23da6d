#include "planedepth/pipeline.hpp"

#include <chrono>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace planedepth {

namespace {

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw Error(ErrorKind::Parse, "not a number: '" + text + "'");
  return v;
}

long long parse_integer(const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(ErrorKind::Parse, "not an integer: '" + text + "'");
  return v;
}

int parse_int(const std::string& text) {
  const long long v = parse_integer(text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw Error(ErrorKind::Parse, "integer out of range: '" + text + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw Error(ErrorKind::Parse, "not a boolean: '" + text + "'");
}

// Shortest text that parses back to the same double.
std::string show(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

ConfigField real(std::string key, std::string help, double PipelineConfig::*member) {
  return {std::move(key), std::move(help), [member](PipelineConfig& c, const std::string& s) { c.*member = parse_double(s); },
          [member](const PipelineConfig& c) { return show(c.*member); }};
}

ConfigField integer(std::string key, std::string help, int PipelineConfig::*member) {
  return {std::move(key), std::move(help), [member](PipelineConfig& c, const std::string& s) { c.*member = parse_int(s); },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

template <typename Get>
ConfigField nested_real(std::string key, std::string help, Get get) {
  return {std::move(key), std::move(help), [get](PipelineConfig& c, const std::string& s) { get(c) = parse_double(s); },
          [get](const PipelineConfig& c) { return show(get(const_cast<PipelineConfig&>(c))); }};
}

template <typename Get>
ConfigField nested_int(std::string key, std::string help, Get get) {
  return {std::move(key), std::move(help), [get](PipelineConfig& c, const std::string& s) { get(c) = parse_int(s); },
          [get](const PipelineConfig& c) { return std::to_string(get(const_cast<PipelineConfig&>(c))); }};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PipelineConfig PipelineConfig::resolve() const {
  PipelineConfig r = *this;
  if (r.superpixels == 0) r.superpixels = mode == Mode::Planar ? 800 : 1200;
  if (r.iterations < 0) r.iterations = SolverConfig::defaults(mode).iterations;
  r.solver.mode = mode;
  r.solver.iterations = r.iterations;
  r.solver.seed = seed;
  return r;
}

void PipelineConfig::validate() const {
  const PipelineConfig r = resolve();
  r.energy.validate();
  r.solver.validate();
  if (r.superpixels < 1) throw Error(ErrorKind::InvalidInput, "superpixels must be positive");
  if (!(r.compactness > 0.0)) throw Error(ErrorKind::InvalidInput, "compactness must be positive");
  if (r.slic_iters < 1) throw Error(ErrorKind::InvalidInput, "slic_iters must be positive");
  if (!(r.lambda >= 0.0)) throw Error(ErrorKind::InvalidInput, "lambda must be non-negative");
  if (!(r.d_th >= 0.0)) throw Error(ErrorKind::InvalidInput, "d_th must be non-negative");
  if (r.crop_height < 0) throw Error(ErrorKind::InvalidInput, "crop_height must be non-negative");
  if (r.h_factor < 1 || r.v_factor < 1) throw Error(ErrorKind::InvalidInput, "downsampling factors must be >= 1");
  if (!(r.ransac_tol > 0.0) || r.ransac_iters < 1)
    throw Error(ErrorKind::InvalidInput, "RANSAC needs a positive tolerance and iteration count");
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back({"mode", "planar or cardboard",
                 [](PipelineConfig& c, const std::string& s) { c.mode = parse_mode(s); },
                 [](const PipelineConfig& c) { return std::string(to_string(c.mode)); }});
    f.push_back(nested_real("theta1", "data term weight", [](PipelineConfig& c) -> double& { return c.energy.theta1; }));
    f.push_back(nested_real("theta2", "depth coherence weight", [](PipelineConfig& c) -> double& { return c.energy.theta2; }));
    f.push_back(nested_real("theta3", "orientation coherence weight",
                            [](PipelineConfig& c) -> double& { return c.energy.theta3; }));
    f.push_back(nested_real("tau1", "depth truncation (m)", [](PipelineConfig& c) -> double& { return c.energy.tau1; }));
    f.push_back(nested_real("tau2", "orientation truncation", [](PipelineConfig& c) -> double& { return c.energy.tau2; }));
    f.push_back({"sigma", "planar proposal std on a,b,c,d (comma separated)",
                 [](PipelineConfig& c, const std::string& s) {
                   std::stringstream in(s);
                   std::string part;
                   Eigen::Vector4d v;
                   int n = 0;
                   while (std::getline(in, part, ',')) {
                     if (n == 4) throw Error(ErrorKind::Parse, "sigma takes four values");
                     v(n++) = parse_double(trim(part));
                   }
                   if (n != 4) throw Error(ErrorKind::Parse, "sigma takes four values");
                   c.solver.sigma = v;
                 },
                 [](const PipelineConfig& c) {
                   return show(c.solver.sigma(0)) + "," + show(c.solver.sigma(1)) + "," + show(c.solver.sigma(2)) +
                          "," + show(c.solver.sigma(3));
                 }});
    f.push_back(nested_real("sigma_depth", "cardboard proposal std on depth (m)",
                            [](PipelineConfig& c) -> double& { return c.solver.sigma_depth; }));
    f.push_back(nested_real("rho", "proposal std decay per iteration",
                            [](PipelineConfig& c) -> double& { return c.solver.decay; }));
    f.push_back(nested_int("n_p", "particles per superpixel",
                           [](PipelineConfig& c) -> int& { return c.solver.num_particles; }));
    f.push_back(integer("n_i", "outer iterations (-1: mode default)", &PipelineConfig::iterations));
    f.push_back(nested_int("trws_iters", "message-passing sweeps per iteration",
                           [](PipelineConfig& c) -> int& { return c.solver.trws_iters; }));
    f.push_back(nested_real("epsilon", "road distance threshold (m)",
                            [](PipelineConfig& c) -> double& { return c.solver.epsilon; }));
    f.push_back(integer("superpixels", "target superpixel count (0: mode default)", &PipelineConfig::superpixels));
    f.push_back(real("compactness", "SLIC compactness", &PipelineConfig::compactness));
    f.push_back(integer("slic_iters", "SLIC iterations", &PipelineConfig::slic_iters));
    f.push_back(real("lambda", "interpolation smoothness", &PipelineConfig::lambda));
    f.push_back({"pls_robust", "robust reweighting in the interpolation",
                 [](PipelineConfig& c, const std::string& s) { c.pls_robust = parse_bool(s); },
                 [](const PipelineConfig& c) { return std::string(c.pls_robust ? "true" : "false"); }});
    f.push_back(real("d_th", "bad pixel threshold (m)", &PipelineConfig::d_th));
    f.push_back(integer("crop_height", "rows kept from the bottom of KITTI frames (0: all)", &PipelineConfig::crop_height));
    f.push_back(integer("h_factor", "horizontal sample lattice step", &PipelineConfig::h_factor));
    f.push_back(integer("v_factor", "vertical sample lattice step", &PipelineConfig::v_factor));
    f.push_back(real("ransac_tol", "road RANSAC inlier distance (m)", &PipelineConfig::ransac_tol));
    f.push_back(integer("ransac_iters", "road RANSAC hypotheses", &PipelineConfig::ransac_iters));
    f.push_back({"seed", "random seed",
                 [](PipelineConfig& c, const std::string& s) {
                   std::uint64_t v = 0;
                   const char* end = s.data() + s.size();
                   const auto [ptr, ec] = std::from_chars(s.data(), end, v);
                   if (ec != std::errc() || ptr != end) throw Error(ErrorKind::Parse, "not a 64-bit seed: '" + s + "'");
                   c.seed = v;
                 },
                 [](const PipelineConfig& c) { return std::to_string(c.seed); }});
    return f;
  }();
  return fields;
}

void apply_config_text(PipelineConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto where = origin + ":" + std::to_string(number);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Parse, where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    const auto& fields = config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) { return f.key == key; });
    if (it == fields.end()) throw Error(ErrorKind::Parse, where + ": unknown key '" + key + "'");
    try {
      it->set(config, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  PipelineConfig c;
  apply_config_text(c, std::string(std::istreambuf_iterator<char>(in), {}), path.string());
  return c;
}

std::string format_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

Planed estimate_road_plane(const SparseDepth& sparse, const Intrinsicsd& k, double tol, int iters,
                           std::uint64_t seed) {
  std::vector<Point3d> below;
  for (const auto& s : sparse.samples()) {
    const Point3d p = backproject(s, k);
    if (p.y() > 0.0) below.push_back(p);
  }
  const auto fit = ransac_plane(below, tol, iters, seed);
  if (std::abs(fit.plane.normal().y()) < 0.8)
    throw Error(ErrorKind::InvalidRoadPlane, "dominant plane below the camera is not horizontal enough to be a road");
  return fit.plane;
}

CompletionResult run_complete(const FrameBundle& frame, const PipelineConfig& config) {
  config.validate();
  const PipelineConfig cfg = config.resolve();
  if (frame.image.width != frame.sparse.width() || frame.image.height != frame.sparse.height())
    throw Error(ErrorKind::InvalidInput, "image and depth sizes differ");
  CompletionResult r;
  const SparseDepth sparse =
      (cfg.h_factor > 1 || cfg.v_factor > 1) ? sparsify(frame.sparse, cfg.h_factor, cfg.v_factor) : frame.sparse;

  auto t0 = std::chrono::steady_clock::now();
  r.graph = slic_segment(frame.image, {cfg.superpixels, cfg.compactness, cfg.slic_iters});
  r.times.segment = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  r.dense0 = pls_interpolate(sparse, {cfg.lambda, cfg.pls_robust});
  r.times.interpolate = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto samples = group_samples(r.graph, sparse);
  std::optional<CardboardModel> model;
  if (cfg.mode == Mode::Planar) {
    r.init = init_planes(r.graph, r.dense0, frame.k);
  } else {
    r.road = estimate_road_plane(sparse, frame.k, cfg.ransac_tol, cfg.ransac_iters, cfg.seed);
    r.init = init_cardboard(r.graph, r.dense0, *r.road, frame.k, cfg.solver.epsilon).planes;
    model = CardboardModel::make(r.graph, *r.road, frame.k, r.dense0);
  }
  r.times.initialize = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const PcbpProblem problem{r.graph, samples, frame.k, cfg.energy};
  r.pcbp = pcbp_run(problem, cfg.solver, r.init, model);
  r.times.inference = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  r.depth = render_depth(r.pcbp.planes, r.graph, frame.k, r.dense0);
  if (cfg.mode == Mode::Cardboard) r.free_space = free_space_mask(r.pcbp.labeling, r.graph);
  r.times.render = seconds_since(t0);
  return r;
}

}  // namespace planedepth
