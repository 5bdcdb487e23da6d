#pragma once

// Depth-map error statistics over pixels valid in both prediction and ground truth.

#include <cstddef>
#include <string>

#include "planedepth/image.hpp"

namespace planedepth {

struct EvalReport {
  double mre = 0.0;  // mean relative error, fraction
  double bpr = 0.0;  // fraction of pixels with |error| > d_th
  double mae = 0.0;  // meters
  std::size_t n_evaluated = 0;
  double d_th = 3.0;
};

/// Throws Error(InvalidInput) on size mismatch and Error(NoOverlap) when no
/// pixel is valid in both maps.
EvalReport evaluate(const DenseDepth& pred, const DenseDepth& gt, double d_th = 3.0);

/// "mre_percent,bpr_percent,mae_m,n_evaluated,d_th_m"
std::string csv_header();
std::string to_csv_row(const EvalReport& report);
std::string to_text(const EvalReport& report);

}  // namespace planedepth
