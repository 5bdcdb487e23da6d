#include <doctest.h>

#include <fstream>
#include <set>

#include "planedepth/error.hpp"
#include "planedepth/pipeline.hpp"
#include "temp_dir.hpp"

using namespace planedepth;

TEST_CASE("config: keys cover every tunable parameter") {
  std::set<std::string> keys;
  for (const auto& f : config_fields()) CHECK(keys.insert(f.key).second);
  for (const char* k : {"mode", "theta1", "theta2", "theta3", "tau1", "tau2", "sigma", "sigma_depth", "rho", "n_p", "n_i",
                        "epsilon", "superpixels", "compactness", "lambda", "d_th", "crop_height", "h_factor",
                        "v_factor", "seed"})
    CHECK_MESSAGE(keys.count(k) == 1, k);
}

TEST_CASE("config: parse values, comments and blank lines") {
  PipelineConfig c;
  apply_config_text(c,
                    "# tuned\n"
                    "mode = cardboard\n"
                    "\n"
                    "theta2=0.5   # inline comment\n"
                    "sigma = 0.1, 0.2, 0.3, 0.4\n"
                    "n_p = 12\n"
                    "seed = 18446744073709551615\n"
                    "pls_robust = false\n");
  CHECK(c.mode == Mode::Cardboard);
  CHECK(c.energy.theta2 == 0.5);
  CHECK(c.solver.sigma == Eigen::Vector4d(0.1, 0.2, 0.3, 0.4));
  CHECK(c.solver.num_particles == 12);
  CHECK(c.seed == 18446744073709551615ull);
  CHECK_FALSE(c.pls_robust);
}

TEST_CASE("config: resolve fills mode defaults") {
  PipelineConfig planar;
  const auto p = planar.resolve();
  CHECK(p.superpixels == 800);
  CHECK(p.solver.iterations == 40);
  PipelineConfig cardboard;
  cardboard.mode = Mode::Cardboard;
  cardboard.seed = 7;
  const auto c = cardboard.resolve();
  CHECK(c.superpixels == 1200);
  CHECK(c.solver.iterations == 20);
  CHECK(c.solver.mode == Mode::Cardboard);
  CHECK(c.solver.seed == 7);
}

TEST_CASE("config: echo parses back to the same values") {
  TempDir dir;
  PipelineConfig c;
  apply_config_text(c, "mode = cardboard\ntheta3 = 0.1\nlambda = 0.3\nsigma = 0.01,0.02,0.03,0.7\nrho = 0.85\n");
  const std::string echo = format_config(c.resolve());
  std::ofstream(dir / "c.txt") << echo;
  const PipelineConfig back = load_config(dir / "c.txt");
  CHECK(format_config(back) == echo);
  CHECK(back.lambda == 0.3);
  CHECK(back.energy.theta3 == 0.1);
}

TEST_CASE("config: errors name the line") {
  PipelineConfig c;
  const auto message = [&c](const std::string& text) {
    try {
      apply_config_text(c, text, "cfg");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Parse);
      return std::string(e.what());
    }
    FAIL("expected an error");
    return std::string();
  };
  CHECK(message("theta1 = 1\nbogus = 3\n").find("cfg:2") != std::string::npos);
  CHECK(message("n_p = ten\n").find("cfg:1") != std::string::npos);
  CHECK(message("no equals sign\n").find("cfg:1") != std::string::npos);
  CHECK(message("sigma = 1,2,3\n").find("cfg:1") != std::string::npos);
  CHECK(message("mode = voxel\n").find("cfg:1") != std::string::npos);
}

TEST_CASE("config: validation rejects out-of-range values") {
  PipelineConfig c;
  c.solver.num_particles = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  PipelineConfig d;
  d.h_factor = 0;
  CHECK_THROWS_AS(d.validate(), Error);
}
