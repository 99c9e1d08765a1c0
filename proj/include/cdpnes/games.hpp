#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdpnes/rng.hpp"

namespace cdpnes {

// Per-agent action box, shared by all agents. lo/hi have one entry per action
// coordinate.
struct BoxConstraint {
  Eigen::VectorXd lo, hi;

  BoxConstraint(Eigen::VectorXd lo_, Eigen::VectorXd hi_)
      : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size())
      throw std::invalid_argument("BoxConstraint: lo/hi size mismatch");
    if ((lo.array() > hi.array()).any())
      throw std::invalid_argument("BoxConstraint: requires lo <= hi");
  }

  static BoxConstraint cube(int d, double lo, double hi) {
    return BoxConstraint(Eigen::VectorXd::Constant(d, lo),
                         Eigen::VectorXd::Constant(d, hi));
  }

  int dim() const { return static_cast<int>(lo.size()); }

  // Euclidean projection of one action (componentwise clamp; idempotent and
  // non-expansive).
  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    if (x.size() != lo.size())
      throw std::invalid_argument("BoxConstraint::project: shape mismatch");
    return x.cwiseMax(lo).cwiseMin(hi);
  }

  // Projection of a flattened joint profile (n blocks of dim() entries) onto
  // the product box.
  Eigen::VectorXd project_profile(const Eigen::VectorXd& v) const {
    const int d = dim();
    if (v.size() % d != 0)
      throw std::invalid_argument("project_profile: length not divisible by d");
    Eigen::VectorXd out(v.size());
    for (int j = 0; j < v.size(); ++j) {
      const int c = static_cast<int>(j % d);
      out(j) = std::min(std::max(v(j), lo(c)), hi(c));
    }
    return out;
  }
};

struct GameConstants {
  double mu_r = 0.0;       // restricted strong monotonicity modulus
  Eigen::VectorXd L;       // per-agent gradient Lipschitz constants
  double L_m = 0.0;        // max_i L_i
  double M = 0.0;          // l1 gradient bound over the relevant box
  bool exact = false;      // derived from affine structure rather than sampled
  bool m_certified = false;  // M taken over the game's own constraint box
  std::string warning;     // nonempty when an assumption looks violated
};

// Explicit affine form of the stacked pseudo-gradient: F(v) = A v + b on the
// flattened profile v (agent j's action occupies entries [j*d, (j+1)*d)).
struct AffineGradientStructure {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

// A non-cooperative game presented through per-agent partial gradients.
// partial_gradient is pure and reentrant; games are immutable once built.
class Game {
 public:
  virtual ~Game() = default;

  int num_agents() const { return n_; }
  int action_dim() const { return d_; }

  // Gradient of J_i in agent i's own action, evaluated at the agent's local
  // estimate of the joint profile (row j = estimated action of agent j).
  virtual Eigen::VectorXd partial_gradient(int i,
                                           const Eigen::MatrixXd& est) const = 0;

  virtual std::optional<BoxConstraint> constraint() const { return std::nullopt; }

  // Affine structure when the stacked gradient map is affine; null otherwise.
  virtual const AffineGradientStructure* affine() const { return nullptr; }

  virtual bool has_cost() const { return false; }
  virtual double cost(int /*i*/, const Eigen::MatrixXd& /*x*/) const {
    throw std::logic_error("cost values not available for this game");
  }

  // Closed-form equilibrium when one exists independent of the linear solve
  // path; null otherwise.
  virtual std::optional<Eigen::MatrixXd> closed_form_ne() const {
    return std::nullopt;
  }

 protected:
  Game(int n, int d) : n_(n), d_(d) {
    if (n < 1 || d < 1) throw std::invalid_argument("Game: need n,d >= 1");
  }

  void check_estimate(int i, const Eigen::MatrixXd& est) const {
    if (i < 0 || i >= n_) throw std::invalid_argument("agent index out of range");
    if (est.rows() != n_ || est.cols() != d_)
      throw std::invalid_argument("estimate must be n x d");
    if (!est.allFinite())
      throw std::invalid_argument("non-finite profile estimate");
  }

  int n_, d_;
};

// F(x) = Q x + c with scalar actions; the canonical monotone testbed. The
// symmetric part of Q positive definite makes the mapping strongly monotone
// with modulus lambda_min((Q + Q^T)/2).
class QuadraticGame : public Game {
 public:
  QuadraticGame(Eigen::MatrixXd q, Eigen::VectorXd c,
                std::optional<BoxConstraint> box = std::nullopt)
      : Game(static_cast<int>(q.rows()), 1), box_(std::move(box)) {
    if (q.rows() != q.cols() || q.rows() != c.size())
      throw std::invalid_argument("QuadraticGame: Q must be n x n, c length n");
    affine_.A = std::move(q);
    affine_.b = std::move(c);
  }

  Eigen::VectorXd partial_gradient(int i, const Eigen::MatrixXd& est) const override {
    check_estimate(i, est);
    Eigen::VectorXd g(1);
    g(0) = affine_.A.row(i).dot(est.col(0)) + affine_.b(i);
    return g;
  }

  std::optional<BoxConstraint> constraint() const override { return box_; }
  const AffineGradientStructure* affine() const override { return &affine_; }

  bool has_cost() const override { return true; }
  // J_i(x) = 1/2 Q_ii x_i^2 + x_i (sum_{j != i} Q_ij x_j + c_i)
  double cost(int i, const Eigen::MatrixXd& x) const override {
    check_estimate(i, x);
    const double xi = x(i, 0);
    double rest = affine_.b(i);
    for (int j = 0; j < n_; ++j)
      if (j != i) rest += affine_.A(i, j) * x(j, 0);
    return 0.5 * affine_.A(i, i) * xi * xi + xi * rest;
  }

  const Eigen::MatrixXd& q() const { return affine_.A; }
  const Eigen::VectorXd& c() const { return affine_.b; }

  // CSV layout: first line n, then n rows of Q, then one row c.
  static QuadraticGame load_csv(const std::filesystem::path& path,
                                std::optional<BoxConstraint> box = std::nullopt) {
    std::ifstream in(path);
    if (!in)
      throw std::runtime_error("QuadraticGame::load_csv: cannot open " +
                               path.string());
    std::string line;
    if (!std::getline(in, line))
      throw std::runtime_error("QuadraticGame::load_csv: empty file");
    const int n = std::stoi(line);
    auto read_row = [&](int expect) {
      if (!std::getline(in, line))
        throw std::runtime_error("QuadraticGame::load_csv: truncated file");
      std::stringstream ss(line);
      std::string cell;
      Eigen::VectorXd row(expect);
      for (int j = 0; j < expect; ++j) {
        if (!std::getline(ss, cell, ','))
          throw std::runtime_error("QuadraticGame::load_csv: short row");
        row(j) = std::stod(cell);
      }
      return row;
    };
    Eigen::MatrixXd q(n, n);
    for (int i = 0; i < n; ++i) q.row(i) = read_row(n).transpose();
    Eigen::VectorXd c = read_row(n);
    return QuadraticGame(std::move(q), std::move(c), std::move(box));
  }

 private:
  AffineGradientStructure affine_;
  std::optional<BoxConstraint> box_;
};

// Sensor connectivity-control game: agent i trades off a local quadratic
// objective against staying close to its physical neighbor. With 1-based
// agent number a = i+1: J_i = a x_i.x_i + x_i.(a,a) + a + ||x_i - x_{next}||^2,
// next = i+1 cyclically, actions in R^2 constrained to a box. The unique
// equilibrium is -0.5 in every coordinate.
class ConnectivityControlGame : public Game {
 public:
  explicit ConnectivityControlGame(int n = 50, double box_lo = -10.0,
                                   double box_hi = 10.0)
      : Game(n, 2), box_(BoxConstraint::cube(2, box_lo, box_hi)) {
    if (n < 2) throw std::invalid_argument("ConnectivityControlGame: n >= 2");
    const int nd = n_ * d_;
    affine_.A = Eigen::MatrixXd::Zero(nd, nd);
    affine_.b = Eigen::VectorXd::Zero(nd);
    for (int i = 0; i < n_; ++i) {
      const double a = i + 1.0;
      const int nxt = (i + 1) % n_;
      for (int t = 0; t < d_; ++t) {
        affine_.A(i * d_ + t, i * d_ + t) = 2.0 * a + 2.0;
        affine_.A(i * d_ + t, nxt * d_ + t) -= 2.0;
        affine_.b(i * d_ + t) = a;
      }
    }
  }

  Eigen::VectorXd partial_gradient(int i, const Eigen::MatrixXd& est) const override {
    check_estimate(i, est);
    const double a = i + 1.0;
    const int nxt = (i + 1) % n_;
    const Eigen::VectorXd own = est.row(i).transpose();
    const Eigen::VectorXd nbr = est.row(nxt).transpose();
    return 2.0 * a * own + Eigen::VectorXd::Constant(d_, a) +
           2.0 * (own - nbr);
  }

  std::optional<BoxConstraint> constraint() const override { return box_; }
  const AffineGradientStructure* affine() const override { return &affine_; }

  bool has_cost() const override { return true; }
  double cost(int i, const Eigen::MatrixXd& x) const override {
    check_estimate(i, x);
    const double a = i + 1.0;
    const int nxt = (i + 1) % n_;
    const Eigen::VectorXd own = x.row(i).transpose();
    const Eigen::VectorXd nbr = x.row(nxt).transpose();
    return a * own.squaredNorm() + a * own.sum() + a +
           (own - nbr).squaredNorm();
  }

  std::optional<Eigen::MatrixXd> closed_form_ne() const override {
    return Eigen::MatrixXd::Constant(n_, d_, -0.5);
  }

 private:
  AffineGradientStructure affine_;
  BoxConstraint box_;
};

// Stacked mapping: row i is agent i's own-action gradient when every agent
// holds the true joint profile x (n x d).
inline Eigen::MatrixXd game_mapping(const Game& game, const Eigen::MatrixXd& x) {
  const int n = game.num_agents(), d = game.action_dim();
  if (x.rows() != n || x.cols() != d)
    throw std::invalid_argument("game_mapping: x must be n x d");
  Eigen::MatrixXd f(n, d);
  for (int i = 0; i < n; ++i) f.row(i) = game.partial_gradient(i, x).transpose();
  return f;
}

// Equilibrium oracle for games with tractable structure. The result always
// satisfies ||F(x*)||_F <= 1e-10.
inline Eigen::MatrixXd solve_ne(const Game& game) {
  const int n = game.num_agents(), d = game.action_dim();
  Eigen::MatrixXd x_star;
  if (auto closed = game.closed_form_ne()) {
    x_star = *closed;
  } else if (const AffineGradientStructure* af = game.affine()) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(af->A);
    if (!lu.isInvertible())
      throw std::runtime_error("solve_ne: singular gradient map, no unique NE");
    const Eigen::VectorXd v = lu.solve(-af->b);
    x_star = Eigen::MatrixXd(n, d);
    for (int i = 0; i < n; ++i)
      x_star.row(i) = v.segment(i * d, d).transpose();
  } else {
    throw std::runtime_error("solve_ne: no oracle for this game kind");
  }
  const double residual = game_mapping(game, x_star).norm();
  if (residual > 1e-10)
    throw std::runtime_error("solve_ne: residual " + std::to_string(residual) +
                             " exceeds 1e-10");
  return x_star;
}

namespace detail {

// max over the tiled box of |a . v + b0| for one affine gradient row; the
// extremes of an affine function over a box are attained coordinatewise.
inline double affine_row_max_abs(const Eigen::VectorXd& a, double b0,
                                 const BoxConstraint& box) {
  const int d = box.dim();
  double hi = b0, lo = b0;
  for (int j = 0; j < a.size(); ++j) {
    const int c = static_cast<int>(j % d);
    hi += std::max(a(j) * box.lo(c), a(j) * box.hi(c));
    lo += std::min(a(j) * box.lo(c), a(j) * box.hi(c));
  }
  return std::max(std::abs(hi), std::abs(lo));
}

}  // namespace detail

// Constants of the standing assumptions. Affine games get exact values
// (monotonicity modulus from the symmetric part, per-agent operator norms,
// l1 gradient bound by corner enumeration of each affine row); other games
// get Monte-Carlo estimates over the sampling box, reported as uncertified.
inline GameConstants estimate_constants(const Game& game,
                                        const BoxConstraint& sample_box,
                                        int n_samples, std::uint64_t seed) {
  const int n = game.num_agents(), d = game.action_dim();
  GameConstants gc;
  gc.L = Eigen::VectorXd::Zero(n);
  const std::optional<BoxConstraint> own_box = game.constraint();
  const BoxConstraint& m_box = own_box ? *own_box : sample_box;
  gc.m_certified = own_box.has_value();

  if (const AffineGradientStructure* af = game.affine()) {
    gc.exact = true;
    const Eigen::MatrixXd sym = 0.5 * (af->A + af->A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    gc.mu_r = es.eigenvalues().minCoeff();
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd block = af->A.middleRows(i * d, d);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
      gc.L(i) = svd.singularValues()(0);
    }
    gc.L_m = gc.L.maxCoeff();
    double m_val = 0.0;
    for (int i = 0; i < n; ++i) {
      double block_l1 = 0.0;
      for (int t = 0; t < d; ++t) {
        const int row = i * d + t;
        block_l1 += detail::affine_row_max_abs(af->A.row(row).transpose(),
                                               af->b(row), m_box);
      }
      m_val = std::max(m_val, block_l1);
    }
    gc.M = m_val;
  } else {
    if (n_samples < 2)
      throw std::invalid_argument("estimate_constants: need n_samples >= 2");
    Rng rng = derive_stream(seed, 0, 0, StreamPurpose::kEstimate);
    auto draw_profile = [&]() {
      Eigen::MatrixXd x(n, d);
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < d; ++t)
          x(i, t) = rng.uniform(sample_box.lo(t), sample_box.hi(t));
      return x;
    };
    double mu_min = std::numeric_limits<double>::infinity();
    double m_max = 0.0;
    for (int s = 0; s < n_samples; ++s) {
      const Eigen::MatrixXd x = draw_profile();
      const Eigen::MatrixXd y = draw_profile();
      const Eigen::MatrixXd fx = game_mapping(game, x);
      const Eigen::MatrixXd fy = game_mapping(game, y);
      const double dist2 = (x - y).squaredNorm();
      if (dist2 > 1e-18) {
        mu_min = std::min(
            mu_min, ((fx - fy).array() * (x - y).array()).sum() / dist2);
        for (int i = 0; i < n; ++i) {
          const double li =
              (fx.row(i) - fy.row(i)).norm() / std::sqrt(dist2);
          gc.L(i) = std::max(gc.L(i), li);
        }
      }
      for (int i = 0; i < n; ++i)
        m_max = std::max(m_max, fx.row(i).lpNorm<1>());
    }
    gc.mu_r = mu_min;
    gc.L_m = gc.L.maxCoeff();
    gc.M = m_max;
    gc.exact = false;
    gc.m_certified = false;
  }
  if (gc.mu_r <= 0.0)
    gc.warning = "estimated monotonicity modulus is not positive (" +
                 std::to_string(gc.mu_r) + ")";
  return gc;
}

// Random game with positive-definite symmetric part, handy for property tests
// and adjacent-pair harnesses.
inline QuadraticGame random_quadratic_game(int n, std::uint64_t seed,
                                           double diag_boost = 1.0,
                                           std::optional<BoxConstraint> box = std::nullopt) {
  Rng rng = derive_stream(seed, 0, 0, StreamPurpose::kInit);
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q(i, j) = rng.uniform(-1.0, 1.0);
  q += (static_cast<double>(n) + diag_boost) * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) c(i) = rng.uniform(-1.0, 1.0);
  return QuadraticGame(std::move(q), std::move(c), std::move(box));
}

}  // namespace cdpnes
