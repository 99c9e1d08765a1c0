#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdpnes/rng.hpp"

namespace cdpnes {

// Row-stochastic weight matrix over a directed communication graph.
// Row i holds the weights agent i applies to messages from its in-neighbors:
// w_ij > 0 iff agent i receives from agent j, or i == j. Immutable after
// construction and safe to share across threads.
class MixingMatrix {
 public:
  static MixingMatrix from_weights(Eigen::MatrixXd w) {
    if (w.rows() != w.cols())
      throw std::invalid_argument("MixingMatrix: weight matrix must be square");
    if (w.rows() < 1)
      throw std::invalid_argument("MixingMatrix: need at least one agent");
    return MixingMatrix(std::move(w));
  }

  int size() const { return static_cast<int>(w_.rows()); }
  const Eigen::MatrixXd& weights() const { return w_; }

  // in-neighbors of agent i, excluding the self-loop
  const std::vector<int>& in_neighbors(int i) const { return in_nbrs_[i]; }

 private:
  explicit MixingMatrix(Eigen::MatrixXd w) : w_(std::move(w)) {
    const int n = static_cast<int>(w_.rows());
    in_nbrs_.resize(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (j != i && w_(i, j) != 0.0) in_nbrs_[i].push_back(j);
  }

  Eigen::MatrixXd w_;
  std::vector<std::vector<int>> in_nbrs_;
};

struct GraphValidationReport {
  double max_row_sum_deviation = 0.0;
  double min_entry = 0.0;
  double max_entry = 0.0;
  double min_diagonal = 0.0;
  int scc_count = 0;
  bool row_stochastic = false;
  bool entries_in_range = false;
  bool positive_diagonal = false;
  bool strongly_connected = false;

  bool ok() const {
    return row_stochastic && entries_in_range && positive_diagonal &&
           strongly_connected;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "row_stochastic=" << (row_stochastic ? "yes" : "no")
       << " (max row-sum deviation " << max_row_sum_deviation << ")"
       << ", entries_in_range=" << (entries_in_range ? "yes" : "no")
       << " [" << min_entry << ", " << max_entry << "]"
       << ", positive_diagonal=" << (positive_diagonal ? "yes" : "no")
       << ", strongly_connected=" << (strongly_connected ? "yes" : "no")
       << " (scc_count=" << scc_count << ")";
    return os.str();
  }
};

namespace detail {

// Iterative Tarjan over the digraph with an edge j -> i whenever w_ij > 0.
// The strongly-connected predicate is invariant under transposition, so the
// receive/send orientation does not matter here.
inline int count_sccs(const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(w.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && w(i, j) != 0.0) adj[j].push_back(i);

  std::vector<int> index(n, -1), lowlink(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int next_index = 0, sccs = 0;

  struct Frame {
    int v;
    std::size_t child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, 0});
    index[root] = lowlink[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.child < adj[f.v].size()) {
        const int u = adj[f.v][f.child++];
        if (index[u] == -1) {
          index[u] = lowlink[u] = next_index++;
          stack.push_back(u);
          on_stack[u] = true;
          call.push_back({u, 0});
        } else if (on_stack[u]) {
          lowlink[f.v] = std::min(lowlink[f.v], index[u]);
        }
      } else {
        if (lowlink[f.v] == index[f.v]) {
          ++sccs;
          int u;
          do {
            u = stack.back();
            stack.pop_back();
            on_stack[u] = false;
          } while (u != f.v);
        }
        const int v = f.v;
        call.pop_back();
        if (!call.empty())
          lowlink[call.back().v] = std::min(lowlink[call.back().v], lowlink[v]);
      }
    }
  }
  return sccs;
}

}  // namespace detail

inline GraphValidationReport validate(const MixingMatrix& m) {
  const Eigen::MatrixXd& w = m.weights();
  const int n = m.size();
  GraphValidationReport rep;
  rep.max_row_sum_deviation =
      (w.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff();
  rep.row_stochastic = rep.max_row_sum_deviation <= 1e-12;
  rep.min_entry = w.minCoeff();
  rep.max_entry = w.maxCoeff();
  rep.entries_in_range = rep.min_entry >= 0.0 && rep.max_entry <= 1.0;
  rep.min_diagonal = w.diagonal().minCoeff();
  rep.positive_diagonal = rep.min_diagonal > 0.0;
  rep.scc_count = detail::count_sccs(w);
  rep.strongly_connected = rep.scc_count == 1;
  return rep;
}

// Directed cycle 1 -> 2 -> ... -> n -> 1 where each agent listens to its
// successor: w_ii = self_weight, w_{i,(i mod n)+1} = 1 - self_weight.
inline MixingMatrix build_ring(int n, double self_weight) {
  if (n < 2) throw std::invalid_argument("build_ring: need n >= 2");
  if (!(self_weight > 0.0 && self_weight < 1.0))
    throw std::invalid_argument("build_ring: self_weight must be in (0,1)");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    w(i, i) = self_weight;
    w(i, (i + 1) % n) = 1.0 - self_weight;
  }
  return MixingMatrix::from_weights(std::move(w));
}

// Ring backbone (strong connectivity by construction) plus i.i.d. extra
// directed edges, each row weighted uniformly over its nonzero support.
inline MixingMatrix build_random_strongly_connected(int n, double edge_prob,
                                                    std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("build_random: need n >= 2");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0))
    throw std::invalid_argument("build_random: edge_prob must be in [0,1]");
  std::vector<std::vector<bool>> support(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    support[i][i] = true;
    support[i][(i + 1) % n] = true;
  }
  Rng rng = derive_stream(seed, 0, 0, StreamPurpose::kGraph);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!support[i][j] && rng.uniform01() < edge_prob) support[i][j] = true;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int j = 0; j < n; ++j) deg += support[i][j] ? 1 : 0;
    for (int j = 0; j < n; ++j)
      if (support[i][j]) w(i, j) = 1.0 / deg;
  }
  return MixingMatrix::from_weights(std::move(w));
}

inline double frob_norm_i_minus_w(const MixingMatrix& m) {
  const int n = m.size();
  return (Eigen::MatrixXd::Identity(n, n) - m.weights()).norm();
}

struct LambdaMinResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool has_nonzero = false;
  // true when the symmetric part has an eigenvalue below -tol; the smallest
  // positive nonzero eigenvalue is still returned
  bool indefinite = false;
};

// Smallest nonzero eigenvalue of sym(I - W) = ((I-W) + (I-W)^T) / 2, the
// quantity entering quadratic-form bounds: <(I-W)x, x> = <sym(I-W)x, x>.
// Eigenvalues are considered zero below 1e-9 relative to the largest
// eigenvalue magnitude; consensus matrices always carry an exact zero at
// the all-ones vector, so a rank cut is unavoidable.
inline LambdaMinResult lambda_min_nonzero(const MixingMatrix& m) {
  const int n = m.size();
  const Eigen::MatrixXd iw =
      Eigen::MatrixXd::Identity(n, n) - m.weights();
  const Eigen::MatrixXd sym = 0.5 * (iw + iw.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("lambda_min_nonzero: eigensolver failed");
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;
  LambdaMinResult res;
  res.indefinite = ev(0) < -tol;
  for (int i = 0; i < n; ++i) {
    if (ev(i) > tol) {
      res.value = ev(i);
      res.has_nonzero = true;
      break;
    }
  }
  return res;
}

// CSV layout: first line n, then n comma-separated rows of n reals.
inline void save_csv(const MixingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path.string());
  const int n = m.size();
  out << n << "\n";
  out.precision(17);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out << (j ? "," : "") << m.weights()(i, j);
    out << "\n";
  }
}

inline MixingMatrix load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file " + path.string());
  const int n = std::stoi(line);
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_csv: truncated matrix in " + path.string());
    std::stringstream ss(line);
    std::string cell;
    for (int j = 0; j < n; ++j) {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error("load_csv: short row in " + path.string());
      w(i, j) = std::stod(cell);
    }
  }
  return MixingMatrix::from_weights(std::move(w));
}

// Text edge list, one "i j weight" triple per line (0-based agents), where
// the triple sets w_ij. Rows are used as-is unless auto_normalize is set,
// in which case each row is rescaled to sum to 1 over its support.
inline MixingMatrix load_edge_list(const std::filesystem::path& path,
                                   bool auto_normalize = false) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_edge_list: cannot open " + path.string());
  struct Edge {
    int i, j;
    double w;
  };
  std::vector<Edge> edges;
  int n = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Edge e{};
    if (!(ss >> e.i >> e.j >> e.w))
      throw std::runtime_error("load_edge_list: parse error at line " +
                               std::to_string(lineno));
    if (e.i < 0 || e.j < 0)
      throw std::runtime_error("load_edge_list: negative agent id at line " +
                               std::to_string(lineno));
    n = std::max(n, std::max(e.i, e.j) + 1);
    edges.push_back(e);
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : edges) w(e.i, e.j) = e.w;
  if (auto_normalize) {
    for (int i = 0; i < n; ++i) {
      const double s = w.row(i).sum();
      if (s > 0.0) w.row(i) /= s;
    }
  }
  return MixingMatrix::from_weights(std::move(w));
}

}  // namespace cdpnes
