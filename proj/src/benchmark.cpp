#include "planedepth/benchmark.hpp"

#include <fstream>
#include <sstream>

namespace planedepth {

std::vector<BenchmarkFrame> read_frame_list(const std::filesystem::path& list) {
  std::ifstream in(list);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + list.string());
  const std::filesystem::path base = list.parent_path();
  const auto resolve = [&base](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  std::vector<BenchmarkFrame> frames;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() != 4)
      throw Error(ErrorKind::Parse, list.string() + ":" + std::to_string(number) + ": expected 'image velodyne calib gt'");
    frames.push_back({std::filesystem::path(tokens[0]).stem().string(), resolve(tokens[0]), resolve(tokens[1]),
                      resolve(tokens[2]), resolve(tokens[3])});
  }
  return frames;
}

FrameBundle load_benchmark_frame(const BenchmarkFrame& frame, int crop_height) {
  FrameBundle bundle = load_kitti_frame(frame.image, frame.velodyne, frame.calib);
  bundle.gt = read_depth_png(frame.gt);
  if (bundle.gt->width() != bundle.image.width || bundle.gt->height() != bundle.image.height)
    throw Error(ErrorKind::InvalidInput, frame.gt.string() + ": ground truth size differs from the image");
  if (crop_height > 0 && crop_height < bundle.image.height) bundle = crop_lower_half(bundle, crop_height);
  return bundle;
}

BenchmarkSummary run_benchmark(const std::vector<BenchmarkFrame>& frames, const PipelineConfig& config,
                               const std::optional<std::filesystem::path>& out_dir) {
  if (frames.empty()) throw Error(ErrorKind::InvalidInput, "empty frame list");
  if (out_dir) std::filesystem::create_directories(*out_dir);
  BenchmarkSummary summary;
  summary.mean.d_th = config.d_th;
  for (const auto& f : frames) {
    const FrameBundle bundle = load_benchmark_frame(f, config.crop_height);
    const CompletionResult result = run_complete(bundle, config);
    if (out_dir) write_depth_png(result.depth, *out_dir / (f.name + ".png"));
    BenchmarkRow row{f.name, evaluate(result.depth, *bundle.gt, config.d_th), result.times};
    summary.mean.mre += row.report.mre;
    summary.mean.bpr += row.report.bpr;
    summary.mean.mae += row.report.mae;
    summary.mean.n_evaluated += row.report.n_evaluated;
    summary.mean_seconds += row.times.total();
    summary.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(summary.rows.size());
  summary.mean.mre /= n;
  summary.mean.bpr /= n;
  summary.mean.mae /= n;
  summary.mean_seconds /= n;
  return summary;
}

std::string format_benchmark_csv(const BenchmarkSummary& summary) {
  std::string out = "frame," + csv_header() + "\n";
  for (const auto& row : summary.rows) out += row.name + "," + to_csv_row(row.report) + "\n";
  out += "mean," + to_csv_row(summary.mean) + "\n";
  return out;
}

}  // namespace planedepth
