#include "planedepth/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "planedepth/error.hpp"

namespace planedepth {

EvalReport evaluate(const DenseDepth& pred, const DenseDepth& gt, double d_th) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw Error(ErrorKind::InvalidInput, "prediction and ground truth sizes differ");
  if (!(d_th >= 0.0)) throw Error(ErrorKind::InvalidInput, "bad-pixel threshold must be non-negative");
  EvalReport r;
  r.d_th = d_th;
  double rel = 0.0, abs_sum = 0.0;
  std::size_t bad = 0;
  // Raster order keeps the summation order fixed.
  for (Eigen::Index i = 0; i < gt.depth.size(); ++i) {
    const double g = gt.depth(i), p = pred.depth(i);
    if (!(g > 0.0) || !std::isfinite(g) || !(p > 0.0) || !std::isfinite(p)) continue;
    const double e = std::abs(g - p);
    rel += e / g;
    abs_sum += e;
    bad += e > d_th ? 1 : 0;
    ++r.n_evaluated;
  }
  if (r.n_evaluated == 0) throw Error(ErrorKind::NoOverlap, "no pixel is valid in both prediction and ground truth");
  const double n = static_cast<double>(r.n_evaluated);
  r.mre = rel / n;
  r.mae = abs_sum / n;
  r.bpr = static_cast<double>(bad) / n;
  return r;
}

std::string csv_header() { return "mre_percent,bpr_percent,mae_m,n_evaluated,d_th_m"; }

std::string to_csv_row(const EvalReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%zu,%g", 100.0 * r.mre, 100.0 * r.bpr, r.mae, r.n_evaluated, r.d_th);
  return line;
}

std::string to_text(const EvalReport& r) {
  char text[256];
  std::snprintf(text, sizeof text, "MRE %.3f%%  BPR(%g m) %.3f%%  MAE %.4f m  over %zu pixels", 100.0 * r.mre, r.d_th,
                100.0 * r.bpr, r.mae, r.n_evaluated);
  return text;
}

}  // namespace planedepth
