#include "planedepth/trws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "planedepth/error.hpp"

namespace planedepth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_min(const Eigen::VectorXd& v) {
  double m = kInf;
  for (Eigen::Index k = 0; k < v.size(); ++k) m = std::min(m, v(k));
  return m;
}

// Messages, incidence lists and chains live in flat arrays: the solver runs
// once per outer iteration on graphs of a few hundred small nodes, where
// per-edge allocations would dominate.
class TrwsState {
 public:
  explicit TrwsState(const PairwiseMrf& mrf) : mrf_(mrf), edges_(mrf.edges()) {
    const int n = mrf.num_nodes();
    const int m = static_cast<int>(edges_.size());
    std::vector<int> in_count(n, 0), out_count(n, 0);
    inc_start_.assign(n + 1, 0);
    to_i_.resize(m);
    to_j_.resize(m);
    std::size_t offset = 0;
    for (int e = 0; e < m; ++e) {
      const auto& edge = edges_[e];
      ++out_count[edge.i];
      ++in_count[edge.j];
      ++inc_start_[edge.i + 1];
      ++inc_start_[edge.j + 1];
      to_i_[e] = offset;
      offset += static_cast<std::size_t>(mrf.num_labels(edge.i));
      to_j_[e] = offset;
      offset += static_cast<std::size_t>(mrf.num_labels(edge.j));
    }
    messages_.assign(offset, 0.0);
    for (int i = 0; i < n; ++i) inc_start_[i + 1] += inc_start_[i];
    incidence_.resize(inc_start_[n]);
    std::vector<int> fill(inc_start_.begin(), inc_start_.end() - 1);
    for (int e = 0; e < m; ++e) {
      incidence_[fill[edges_[e].i]++] = {e, true};
      incidence_[fill[edges_[e].j]++] = {e, false};
    }
    gamma_.resize(n);
    Eigen::Index max_labels = 1;
    for (int i = 0; i < n; ++i) {
      gamma_[i] = 1.0 / std::max({in_count[i], out_count[i], 1});
      max_labels = std::max(max_labels, mrf.unary(i).size());
    }
    scratch_a_.resize(max_labels);
    scratch_b_.resize(max_labels);
    share_.resize(max_labels);
    build_chains();
  }

  void sweep() {
    const int n = mrf_.num_nodes();
    for (int i = 0; i < n; ++i) pass_messages(i, true);
    for (int i = n - 1; i >= 0; --i) pass_messages(i, false);
  }

  [[nodiscard]] std::vector<int> extract_labels() {
    const int n = mrf_.num_nodes();
    std::vector<int> labels(n, 0);
    for (int i = 0; i < n; ++i) {
      const auto& unary = mrf_.unary(i);
      const Eigen::Index size = unary.size();
      double* score = scratch_a_.data();
      for (Eigen::Index x = 0; x < size; ++x) score[x] = unary(x);
      for (int k = inc_start_[i]; k < inc_start_[i + 1]; ++k) {
        const auto [e, lower] = incidence_[k];
        if (lower) {
          const double* msg = messages_.data() + to_i_[e];
          for (Eigen::Index x = 0; x < size; ++x) score[x] += msg[x];
        } else {
          const auto& cost = edges_[e].cost;
          const Eigen::Index row = labels[edges_[e].i];
          for (Eigen::Index x = 0; x < size; ++x) score[x] += cost(row, x);
        }
      }
      Eigen::Index best = 0;
      double best_value = kInf;
      for (Eigen::Index x = 0; x < size; ++x) {
        if (score[x] < best_value) {
          best_value = score[x];
          best = x;
        }
      }
      labels[i] = static_cast<int>(best);
    }
    return labels;
  }

  /// Sum over monotonic chains of the chain minimum, with each node's
  /// reparameterized unary split evenly over the chains through it.
  [[nodiscard]] double lower_bound() {
    double bound = 0.0;
    for (const auto& [head_node, head_edge] : chain_heads_) {
      double* value = scratch_a_.data();
      double* next = scratch_b_.data();
      Eigen::Index size = node_share(head_node, value);
      for (int e = head_edge; e >= 0; e = next_edge_[e]) {
        const auto& edge = edges_[e];
        const double* to_i = messages_.data() + to_i_[e];
        const double* to_j = messages_.data() + to_j_[e];
        const Eigen::Index next_size = node_share(edge.j, share_.data());
        for (Eigen::Index xj = 0; xj < next_size; ++xj) {
          const double share = share_[xj];
          if (!std::isfinite(share)) {
            next[xj] = kInf;
            continue;
          }
          double best = kInf;
          for (Eigen::Index xi = 0; xi < size; ++xi) {
            if (!std::isfinite(value[xi])) continue;
            const double c = edge.cost(xi, xj) - to_i[xi] - to_j[xj];
            best = std::min(best, value[xi] + c);
          }
          next[xj] = best + share;
        }
        std::swap(value, next);
        size = next_size;
      }
      double m = kInf;
      for (Eigen::Index x = 0; x < size; ++x) m = std::min(m, value[x]);
      bound += m;
    }
    return bound;
  }

 private:
  struct Incidence {
    int edge;
    bool lower;  // this node is edge.i
  };

  // Reparameterized unary of node i written to `out`; returns the label count.
  Eigen::Index belief(int i, double* out) const {
    const auto& unary = mrf_.unary(i);
    const Eigen::Index size = unary.size();
    for (Eigen::Index x = 0; x < size; ++x) out[x] = unary(x);
    for (int k = inc_start_[i]; k < inc_start_[i + 1]; ++k) {
      const auto [e, lower] = incidence_[k];
      const double* msg = messages_.data() + (lower ? to_i_[e] : to_j_[e]);
      for (Eigen::Index x = 0; x < size; ++x) out[x] += msg[x];
    }
    return size;
  }

  Eigen::Index node_share(int i, double* out) const {
    const Eigen::Index size = belief(i, out);
    for (Eigen::Index x = 0; x < size; ++x) out[x] *= gamma_[i];
    return size;
  }

  void pass_messages(int i, bool forward) {
    double* theta = share_.data();
    double* base = scratch_a_.data();
    const Eigen::Index size = belief(i, theta);
    for (int k = inc_start_[i]; k < inc_start_[i + 1]; ++k) {
      const auto [e, lower] = incidence_[k];
      if (lower != forward) continue;  // forward: i -> higher neighbours
      const auto& edge = edges_[e];
      const double* reverse = messages_.data() + (forward ? to_i_[e] : to_j_[e]);
      for (Eigen::Index x = 0; x < size; ++x)
        base[x] = std::isfinite(theta[x]) ? gamma_[i] * theta[x] - reverse[x] : kInf;

      double* out = messages_.data() + (forward ? to_j_[e] : to_i_[e]);
      const Eigen::Index other = forward ? edge.cost.cols() : edge.cost.rows();
      double low = kInf;
      for (Eigen::Index y = 0; y < other; ++y) {
        double best = kInf;
        if (forward) {
          const double* col = edge.cost.col(y).data();
          for (Eigen::Index x = 0; x < size; ++x) best = std::min(best, base[x] + col[x]);
        } else {
          for (Eigen::Index x = 0; x < size; ++x) best = std::min(best, base[x] + edge.cost(y, x));
        }
        out[y] = best;
        low = std::min(low, best);
      }
      if (std::isfinite(low))
        for (Eigen::Index y = 0; y < other; ++y) out[y] -= low;
    }
  }

  // Chains follow the node order: at node i the k-th incoming edge continues
  // into the k-th outgoing edge; surplus outgoing edges start new chains.
  void build_chains() {
    const int n = mrf_.num_nodes();
    next_edge_.assign(edges_.size(), -1);
    std::vector<int> in, out;
    for (int i = 0; i < n; ++i) {
      in.clear();
      out.clear();
      for (int k = inc_start_[i]; k < inc_start_[i + 1]; ++k)
        (incidence_[k].lower ? out : in).push_back(incidence_[k].edge);
      for (std::size_t k = 0; k < out.size(); ++k) {
        if (k < in.size())
          next_edge_[in[k]] = out[k];
        else
          chain_heads_.emplace_back(i, out[k]);
      }
      if (in.empty() && out.empty()) chain_heads_.emplace_back(i, -1);
    }
  }

  const PairwiseMrf& mrf_;
  const std::vector<PairwiseMrf::Edge>& edges_;
  std::vector<int> inc_start_;
  std::vector<Incidence> incidence_;
  std::vector<double> gamma_;
  std::vector<std::size_t> to_i_, to_j_;  // offsets into messages_
  std::vector<double> messages_;
  std::vector<int> next_edge_;
  std::vector<std::pair<int, int>> chain_heads_;  // (first node, first edge or -1)
  // Scratch rows sized to the largest label set.
  std::vector<double> scratch_a_, scratch_b_, share_;
};

}  // namespace

int PairwiseMrf::add_node(Eigen::VectorXd unary) {
  if (unary.size() == 0) throw Error(ErrorKind::InvalidInput, "node needs at least one label");
  unary_.push_back(std::move(unary));
  return static_cast<int>(unary_.size()) - 1;
}

void PairwiseMrf::add_edge(int a, int b, Eigen::MatrixXd cost) {
  if (a == b || a < 0 || b < 0 || a >= num_nodes() || b >= num_nodes())
    throw Error(ErrorKind::InvalidInput, "edge endpoints must be distinct existing nodes");
  if (a > b) {
    std::swap(a, b);
    cost.transposeInPlace();
  }
  if (cost.rows() != num_labels(a) || cost.cols() != num_labels(b))
    throw Error(ErrorKind::InvalidInput, "edge table does not match label counts");
  edges_.push_back({a, b, std::move(cost)});
}

double PairwiseMrf::energy(std::span<const int> labels) const {
  if (labels.size() != unary_.size()) throw Error(ErrorKind::InvalidInput, "labeling size mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < unary_.size(); ++i) e += unary_[i](labels[i]);
  for (const auto& edge : edges_) e += edge.cost(labels[edge.i], labels[edge.j]);
  return e;
}

TrwsResult trws_solve(const PairwiseMrf& mrf, const TrwsOptions& options) {
  for (int i = 0; i < mrf.num_nodes(); ++i)
    if (!std::isfinite(finite_min(mrf.unary(i))))
      throw Error(ErrorKind::InfeasibleNode, "node " + std::to_string(i) + " has no finite label");
  if (options.sweeps < 1) throw Error(ErrorKind::InvalidInput, "TRW-S needs at least one sweep");

  TrwsState state(mrf);
  TrwsResult result;
  result.energy = kInf;
  double previous = -kInf;
  for (int s = 0; s < options.sweeps; ++s) {
    state.sweep();
    const double bound = state.lower_bound();
    result.bound_history.push_back(bound);

    auto labels = state.extract_labels();
    const double e = mrf.energy(labels);
    if (result.labels.empty() || e < result.energy) {
      result.energy = e;
      result.labels = std::move(labels);
    }
    if (options.stop_tolerance > 0.0) {
      const double slack = options.stop_tolerance * std::max(1.0, std::abs(bound));
      // A closed duality gap proves the labeling optimal.
      if (result.energy - bound <= slack) break;
      if (std::isfinite(previous) && bound - previous <= slack) break;
    }
    previous = bound;
  }
  result.lower_bound = result.bound_history.back();
  return result;
}

}  // namespace planedepth
