// Command-line front end: segment, complete, eval, synth, sparsify, kitti.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "planedepth/benchmark.hpp"
#include "planedepth/metrics.hpp"
#include "planedepth/pipeline.hpp"
#include "planedepth/synthetic.hpp"

namespace fs = std::filesystem;
using namespace planedepth;

namespace {

// Every config key becomes a same-named flag; given flags override the file.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& field : config_fields())
      options.emplace_back(field.key, app->add_option("--" + field.key, values[field.key], field.help));
  }

  [[nodiscard]] PipelineConfig build() const {
    PipelineConfig config = file.empty() ? PipelineConfig{} : load_config(file);
    for (const auto& [key, option] : options) {
      if (option->count() == 0) continue;
      for (const auto& field : config_fields())
        if (field.key == key) {
          try {
            field.set(config, values.at(key));
          } catch (const Error& e) {
            throw Error(ErrorKind::Parse, "--" + key + ": " + e.what());
          }
        }
    }
    config.validate();
    return config;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!(out << text)) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

struct FrameInput {
  std::string frame_dir;
  std::string image, velodyne, calib, gt;

  void attach(CLI::App* app) {
    auto* dir = app->add_option("--frame", frame_dir, "frame directory written by `synth`");
    auto* img = app->add_option("--image", image, "KITTI left colour image");
    auto* velo = app->add_option("--velodyne", velodyne, "KITTI velodyne .bin")->needs(img);
    auto* cal = app->add_option("--calib", calib, "KITTI calibration text")->needs(img);
    img->needs(velo)->needs(cal);
    app->add_option("--gt", gt, "ground-truth depth PNG at full image size");
    dir->excludes(img);
  }

  [[nodiscard]] FrameBundle load(int crop_height) const {
    if (!frame_dir.empty()) {
      FrameBundle frame = read_frame_dir(frame_dir);
      if (!gt.empty()) frame.gt = read_depth_png(gt);
      return frame;
    }
    if (image.empty()) throw Error(ErrorKind::InvalidInput, "give --frame or --image/--velodyne/--calib");
    FrameBundle frame = load_kitti_frame(image, velodyne, calib);
    if (!gt.empty()) frame.gt = read_depth_png(gt);
    if (crop_height > 0 && crop_height < frame.image.height) frame = crop_lower_half(frame, crop_height);
    return frame;
  }
};

std::string format_times(const StageTimes& t) {
  char text[256];
  std::snprintf(text, sizeof text,
                "segment %.3f s\ninterpolate %.3f s\ninitialize %.3f s\ninference %.3f s\nrender %.3f s\ntotal %.3f s\n",
                t.segment, t.interpolate, t.initialize, t.inference, t.render, t.total());
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense depth completion from sparse LiDAR with piecewise-planar and cardboard-world CRFs"};
  app.require_subcommand(1);

  // segment
  auto* segment = app.add_subcommand("segment", "SLIC superpixels: 16-bit label PNG and boundary overlay");
  std::string seg_image, seg_out;
  ConfigFlags seg_config;
  segment->add_option("--image", seg_image, "input colour PNG")->required()->check(CLI::ExistingFile);
  segment->add_option("--out", seg_out, "output directory")->required();
  seg_config.attach(segment);

  // complete
  auto* complete = app.add_subcommand("complete", "dense depth from an image and sparse depth");
  FrameInput complete_input;
  std::string complete_out;
  bool binary_ply = false;
  ConfigFlags complete_config;
  complete_input.attach(complete);
  complete->add_option("--out", complete_out, "output directory")->required();
  complete->add_flag("--binary-ply", binary_ply, "write the point cloud as binary little-endian PLY");
  complete_config.attach(complete);

  // eval
  auto* eval = app.add_subcommand("eval", "MRE, BPR and MAE of predicted depth against ground truth");
  std::string eval_pred, eval_gt, eval_list, eval_csv;
  double eval_dth = 3.0;
  eval->add_option("--pred", eval_pred, "predicted depth PNG");
  eval->add_option("--gt", eval_gt, "ground-truth depth PNG");
  eval->add_option("--list", eval_list, "file of `pred gt` pairs, one per line")->excludes("--pred")->excludes("--gt");
  eval->add_option("--d_th", eval_dth, "bad-pixel threshold in meters")->capture_default_str();
  eval->add_option("--csv", eval_csv, "also write the CSV report here");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic street frame directory with ground truth");
  std::string synth_out;
  bool synth_shadows = false;
  SyntheticScene scene = SyntheticScene::street(false);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_flag("--shadows", synth_shadows, "paint shadow patches on the road");
  synth->add_option("--texture_seed", scene.texture_seed, "colour noise seed")->capture_default_str();
  synth->add_option("--noise", scene.noise, "colour noise amplitude")->capture_default_str();
  synth->add_option("--h_factor", scene.h_factor, "sample every h-th column")->capture_default_str();
  synth->add_option("--v_factor", scene.v_factor, "sample every v-th row")->capture_default_str();

  // sparsify
  auto* sparsify_cmd = app.add_subcommand("sparsify", "keep depth samples on a (h, v) lattice");
  std::string sp_in, sp_out;
  int sp_h = 6, sp_v = 3;
  sparsify_cmd->add_option("--in", sp_in, "input depth PNG")->required()->check(CLI::ExistingFile);
  sparsify_cmd->add_option("--out", sp_out, "output depth PNG")->required();
  sparsify_cmd->add_option("--h_factor", sp_h, "column step")->capture_default_str();
  sparsify_cmd->add_option("--v_factor", sp_v, "row step")->capture_default_str();

  // kitti
  auto* kitti = app.add_subcommand("kitti", "complete and score every frame of a KITTI frame list");
  std::string kitti_list, kitti_out;
  ConfigFlags kitti_config;
  kitti->add_option("--list", kitti_list, "lines of `image velodyne calib gt`")->required()->check(CLI::ExistingFile);
  kitti->add_option("--out", kitti_out, "output directory")->required();
  kitti_config.attach(kitti);

  CLI11_PARSE(app, argc, argv);

  try {
    if (segment->parsed()) {
      const PipelineConfig config = seg_config.build().resolve();
      const RgbImage image = read_rgb_png(seg_image);
      const SuperpixelGraph graph = slic_segment(image, {config.superpixels, config.compactness, config.slic_iters});
      fs::create_directories(seg_out);
      write_label_png(graph.labels, fs::path(seg_out) / "labels.png");
      write_rgb_png(boundary_overlay(image, graph.labels), fs::path(seg_out) / "overlay.png");
      std::cout << graph.size() << " superpixels\n";
    } else if (complete->parsed()) {
      const PipelineConfig config = complete_config.build();
      const FrameBundle frame = complete_input.load(config.crop_height);
      const CompletionResult r = run_complete(frame, config);
      const fs::path out(complete_out);
      fs::create_directories(out);
      write_text(out / "config.txt", format_config(config.resolve()));
      write_depth_png(r.depth, out / "depth.png");
      write_depth_png(r.dense0, out / "init_depth.png");
      write_label_png(r.graph.labels, out / "labels.png");
      write_text(out / "trace.csv", format_trace_csv(r.pcbp.trace));
      write_ply(r.depth, frame.image, frame.k, out / "cloud.ply", r.free_space ? &*r.free_space : nullptr, binary_ply);
      if (r.free_space) write_mask_png(*r.free_space, out / "free_space.png");
      write_text(out / "timing.txt", format_times(r.times));
      std::cout << "energy " << r.pcbp.initial.total() << " -> " << r.pcbp.final.total() << " in " << r.times.total() << " s\n";
      if (frame.gt) {
        const EvalReport report = evaluate(r.depth, *frame.gt, config.d_th);
        write_text(out / "metrics.csv", csv_header() + "\n" + to_csv_row(report) + "\n");
        write_text(out / "metrics.txt", to_text(report) + "\n");
        std::cout << to_text(report) << '\n';
      }
    } else if (eval->parsed()) {
      std::vector<std::pair<std::string, std::string>> pairs;
      if (!eval_list.empty()) {
        std::ifstream in(eval_list);
        if (!in) throw Error(ErrorKind::Io, "cannot open " + eval_list);
        const fs::path base = fs::path(eval_list).parent_path();
        const auto resolve = [&base](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
        std::string line;
        for (int number = 1; std::getline(in, line); ++number) {
          if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
          std::istringstream fields(line);
          std::string pred, gt, extra;
          if (!(fields >> pred)) continue;
          if (!(fields >> gt) || (fields >> extra))
            throw Error(ErrorKind::Parse, eval_list + ":" + std::to_string(number) + ": expected 'pred gt'");
          pairs.emplace_back(resolve(pred), resolve(gt));
        }
      } else if (!eval_pred.empty() && !eval_gt.empty()) {
        pairs.emplace_back(eval_pred, eval_gt);
      } else {
        throw Error(ErrorKind::InvalidInput, "give --pred and --gt, or --list");
      }
      if (pairs.empty()) throw Error(ErrorKind::InvalidInput, "empty frame list");

      std::string csv = "frame," + csv_header() + "\n";
      EvalReport mean;
      mean.d_th = eval_dth;
      for (const auto& [pred, gt] : pairs) {
        const EvalReport r = evaluate(read_depth_png(pred), read_depth_png(gt), eval_dth);
        csv += fs::path(pred).stem().string() + "," + to_csv_row(r) + "\n";
        mean.mre += r.mre;
        mean.bpr += r.bpr;
        mean.mae += r.mae;
        mean.n_evaluated += r.n_evaluated;
      }
      const double n = static_cast<double>(pairs.size());
      mean.mre /= n;
      mean.bpr /= n;
      mean.mae /= n;
      if (pairs.size() > 1) csv += "mean," + to_csv_row(mean) + "\n";
      if (!eval_csv.empty()) write_text(eval_csv, csv);
      std::cout << csv << to_text(mean) << '\n';
    } else if (synth->parsed()) {
      if (synth_shadows) scene.shadows = SyntheticScene::street(true).shadows;
      const SyntheticFrame s = generate_synthetic(scene);
      write_frame_dir(s.frame, synth_out);
      write_mask_png(s.road_mask, fs::path(synth_out) / "road_mask.png");
      std::cout << s.frame.sparse.size() << " samples\n";
    } else if (sparsify_cmd->parsed()) {
      const SparseDepth kept = sparsify(read_depth_png(sp_in), sp_h, sp_v);
      write_depth_png(kept.to_dense(), sp_out);
      std::cout << kept.size() << " samples\n";
    } else if (kitti->parsed()) {
      const PipelineConfig config = kitti_config.build();
      const fs::path out(kitti_out);
      const BenchmarkSummary summary = run_benchmark(read_frame_list(kitti_list), config, out / "depth");
      write_text(out / "config.txt", format_config(config.resolve()));
      write_text(out / "metrics.csv", format_benchmark_csv(summary));
      write_text(out / "metrics.txt", to_text(summary.mean) + "\n");
      std::cout << summary.rows.size() << " frames, " << to_text(summary.mean) << ", " << summary.mean_seconds
                << " s per frame\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
