#pragma once

// Sequential tree-reweighted message passing (TRW-S) for pairwise MRFs with
// per-node label sets. Costs may be +inf to mark infeasible labels.

#include <Eigen/Core>

#include <span>
#include <vector>

namespace planedepth {

class PairwiseMrf {
 public:
  struct Edge {
    int i;                 // i < j
    int j;
    Eigen::MatrixXd cost;  // cost(label_i, label_j)
  };

  int add_node(Eigen::VectorXd unary);
  /// Adds the pairwise table; stored with the smaller node id first.
  void add_edge(int a, int b, Eigen::MatrixXd cost);

  [[nodiscard]] int num_nodes() const noexcept { return static_cast<int>(unary_.size()); }
  [[nodiscard]] int num_labels(int node) const { return static_cast<int>(unary_[node].size()); }
  [[nodiscard]] const Eigen::VectorXd& unary(int node) const { return unary_[node]; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }

  [[nodiscard]] double energy(std::span<const int> labels) const;

 private:
  std::vector<Eigen::VectorXd> unary_;
  std::vector<Edge> edges_;
};

struct TrwsOptions {
  int sweeps = 30;
  /// Stop early once a sweep raises the bound, or the best labeling's energy
  /// exceeds the bound, by no more than this fraction of max(1, |bound|).
  /// Zero runs every sweep.
  double stop_tolerance = 0.0;
};

struct TrwsResult {
  std::vector<int> labels;
  double energy = 0.0;
  double lower_bound = 0.0;
  std::vector<double> bound_history;  // bound after each forward+backward sweep
};

/// Nodes are processed in index order (forward) then reverse (backward), with
/// node weights 1 / max(#lower neighbours, #higher neighbours). The bound is
/// evaluated on the decomposition of the graph into monotonic chains implied
/// by that ordering. The returned labeling is the best one extracted over all
/// sweeps.
///
/// Throws Error(InfeasibleNode) if some node has no finite label.
TrwsResult trws_solve(const PairwiseMrf& mrf, const TrwsOptions& options = {});

}  // namespace planedepth
