#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdpnes/compressors.hpp"
#include "cdpnes/games.hpp"
#include "cdpnes/graph.hpp"
#include "cdpnes/privacy.hpp"
#include "cdpnes/rng.hpp"

namespace cdpnes {

// Per-agent state of the difference-compression recursion. x_est is the
// agent's estimate of the flattened joint profile (own block = own action),
// ref is the compression reference it shares with its out-neighbors, and
// ref_mix tracks the weighted combination of in-neighbor references. After
// bootstrap the stacked matrices satisfy RefMix = W * Ref at every iteration.
struct AgentState {
  Eigen::VectorXd x_est;
  Eigen::VectorXd ref;
  Eigen::VectorXd ref_mix;
};

struct RunParams {
  double gamma = 0.0;  // consensus stepsize
  double eta = 0.0;    // gradient stepsize
  double alpha = 0.0;  // reference mixing factor, in (0, 1/r]
  int horizon = 0;     // iterations K
  NoiseParams noise;
  Compressor compressor = Compressor::identity();
  bool projected = false;
  std::uint64_t seed = 0;
  int scalar_bits = 32;  // l in the bit accounting model

  void validate(int n) const {
    if (gamma < 0.0 || eta < 0.0)
      throw std::invalid_argument("RunParams: gamma/eta must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("RunParams: alpha must be in (0, 1]");
    if (horizon < 0) throw std::invalid_argument("RunParams: negative horizon");
    if (noise.theta.size() != n)
      throw std::invalid_argument("RunParams: noise vector must have n entries");
    if ((noise.theta.array() < 0.0).any())
      throw std::invalid_argument("RunParams: negative noise scale");
    if (scalar_bits < 1)
      throw std::invalid_argument("RunParams: scalar_bits must be >= 1");
  }
};

struct StepRecord {
  int k = 0;
  double residual_full = std::numeric_limits<double>::quiet_NaN();
  double residual_own = std::numeric_limits<double>::quiet_NaN();
  double comp_gap = 0.0;  // ||Xtilde^k - Ref^k||_F at compression time
  double err_norm = 0.0;  // ||X^k - Xhat^k||_F
  std::int64_t cum_bits = 0;
  double elapsed_s = 0.0;
};

struct RunResult {
  int n = 0, d = 0;
  std::vector<AgentState> final_states;
  std::vector<StepRecord> trace;
  double initial_residual_full = std::numeric_limits<double>::quiet_NaN();
  double initial_residual_own = std::numeric_limits<double>::quiet_NaN();
  std::optional<int> diverged_at;
  std::int64_t total_bits = 0;

  // The reported residual follows the experiment convention: own-action
  // distance for multi-dimensional actions, full estimate distance for
  // scalar ones.
  static double reported_residual(const StepRecord& r, int d) {
    return d > 1 ? r.residual_own : r.residual_full;
  }
};

inline Eigen::MatrixXd stack_estimates(const std::vector<AgentState>& s) {
  const int n = static_cast<int>(s.size());
  Eigen::MatrixXd out(n, s[0].x_est.size());
  for (int i = 0; i < n; ++i) out.row(i) = s[i].x_est.transpose();
  return out;
}

inline Eigen::MatrixXd stack_refs(const std::vector<AgentState>& s) {
  const int n = static_cast<int>(s.size());
  Eigen::MatrixXd out(n, s[0].ref.size());
  for (int i = 0; i < n; ++i) out.row(i) = s[i].ref.transpose();
  return out;
}

inline Eigen::MatrixXd stack_ref_mix(const std::vector<AgentState>& s) {
  const int n = static_cast<int>(s.size());
  Eigen::MatrixXd out(n, s[0].ref_mix.size());
  for (int i = 0; i < n; ++i) out.row(i) = s[i].ref_mix.transpose();
  return out;
}

inline Eigen::MatrixXd own_actions(const std::vector<AgentState>& s, int d) {
  const int n = static_cast<int>(s.size());
  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i)
    out.row(i) = s[i].x_est.segment(i * d, d).transpose();
  return out;
}

// One uncompressed exchange of the initial references: each agent receives
// its in-neighbors' ref vectors once and forms ref_mix = sum_j w_ij ref_j,
// so the stacked identity RefMix = W * Ref holds exactly from the start.
inline std::vector<AgentState> bootstrap(const Eigen::MatrixXd& x0,
                                         const Eigen::MatrixXd& h0,
                                         const MixingMatrix& graph) {
  const int n = graph.size();
  if (x0.rows() != n || h0.rows() != n || x0.cols() != h0.cols())
    throw std::invalid_argument("bootstrap: shape mismatch");
  const Eigen::MatrixXd& w = graph.weights();
  std::vector<AgentState> states(n);
  for (int i = 0; i < n; ++i) {
    states[i].x_est = x0.row(i).transpose();
    states[i].ref = h0.row(i).transpose();
    Eigen::VectorXd mix = w(i, i) * h0.row(i).transpose();
    for (int j : graph.in_neighbors(i)) mix += w(i, j) * h0.row(j).transpose();
    states[i].ref_mix = mix;
  }
  return states;
}

namespace detail {

inline Eigen::MatrixXd profile_matrix(const Eigen::VectorXd& v, int n, int d) {
  Eigen::MatrixXd out(n, d);
  for (int j = 0; j < n; ++j) out.row(j) = v.segment(j * d, d).transpose();
  return out;
}

struct StepStats {
  double comp_gap = 0.0;
  double err_norm = 0.0;
  std::int64_t bits = 0;
};

// Executes one synchronous round given the noise matrix for this iteration.
// Phase 1 (per agent, order-independent): perturb, compress the difference to
// the reference, evaluate the own-action gradient at the pre-noise estimate.
// Phase 2 (after the exchange): reconstruct both estimates, advance the
// references, and commit the state update.
// Optional bitwise override of one agent's perturbed state; the coupled-pair
// driver uses it to realize the noise bijection exactly in floating point
// (the implied noise is perturbed - x_est by construction).
struct PerturbedOverride {
  int agent = -1;
  Eigen::VectorXd value;
};

inline StepStats step_with_noise(std::vector<AgentState>& states,
                                 const Game& game, const MixingMatrix& graph,
                                 const RunParams& p, int k,
                                 const Eigen::MatrixXd& noise,
                                 std::vector<CompressedMessage>* messages_out,
                                 const PerturbedOverride* override_row = nullptr) {
  const int n = graph.size();
  const int d = game.action_dim();
  const Eigen::MatrixXd& w = graph.weights();
  StepStats stats;

  std::vector<Eigen::VectorXd> perturbed(n);
  std::vector<Eigen::VectorXd> gradients(n);
  std::vector<CompressedMessage> messages(n);
  double gap_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    if (override_row && override_row->agent == i)
      perturbed[i] = override_row->value;
    else
      perturbed[i] = states[i].x_est + noise.row(i).transpose();
    gradients[i] =
        game.partial_gradient(i, profile_matrix(states[i].x_est, n, d));
    const Eigen::VectorXd diff = perturbed[i] - states[i].ref;
    gap_sq += diff.squaredNorm();
    Rng zeta = derive_stream(p.seed, static_cast<std::uint64_t>(i),
                             static_cast<std::uint64_t>(k),
                             StreamPurpose::kCompress);
    messages[i] = p.compressor.compress(diff, zeta, p.scalar_bits);
    stats.bits += messages[i].bits;
  }
  stats.comp_gap = std::sqrt(gap_sq);

  const std::optional<BoxConstraint> box =
      p.projected ? game.constraint() : std::nullopt;
  double err_sq = 0.0;
  std::vector<Eigen::VectorXd> next(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x_hat = states[i].ref + messages[i].decoded;
    Eigen::VectorXd x_hat_w = states[i].ref_mix + w(i, i) * messages[i].decoded;
    for (int j : graph.in_neighbors(i)) x_hat_w += w(i, j) * messages[j].decoded;

    err_sq += (states[i].x_est - x_hat).squaredNorm();

    Eigen::VectorXd x_next = perturbed[i] - p.gamma * (x_hat - x_hat_w);
    x_next.segment(i * d, d) -= p.gamma * p.eta * gradients[i];
    if (box) x_next = box->project_profile(x_next);
    next[i] = std::move(x_next);

    states[i].ref = (1.0 - p.alpha) * states[i].ref + p.alpha * x_hat;
    states[i].ref_mix = (1.0 - p.alpha) * states[i].ref_mix + p.alpha * x_hat_w;
  }
  for (int i = 0; i < n; ++i) states[i].x_est = std::move(next[i]);
  stats.err_norm = std::sqrt(err_sq);
  if (messages_out) *messages_out = std::move(messages);
  return stats;
}

inline Eigen::MatrixXd draw_noise(const RunParams& p, int n, int m, int k) {
  Eigen::MatrixXd noise(n, m);
  for (int i = 0; i < n; ++i) {
    Rng stream = derive_stream(p.seed, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(k),
                               StreamPurpose::kNoise);
    for (int j = 0; j < m; ++j) noise(i, j) = stream.laplace(p.noise.theta(i));
  }
  return noise;
}

inline bool state_sane(const std::vector<AgentState>& states) {
  for (const AgentState& s : states)
    if (!s.x_est.allFinite() || !s.ref.allFinite() || !s.ref_mix.allFinite())
      return false;
  return true;
}

struct ResidualOracle {
  bool available = false;
  Eigen::MatrixXd x_star;          // n x d
  Eigen::MatrixXd x_star_stacked;  // n x (n*d), every row the flattened NE

  static ResidualOracle build(const Game& game) {
    ResidualOracle o;
    try {
      o.x_star = solve_ne(game);
    } catch (const std::exception&) {
      return o;
    }
    const int n = game.num_agents(), d = game.action_dim();
    Eigen::VectorXd flat(n * d);
    for (int j = 0; j < n; ++j) flat.segment(j * d, d) = o.x_star.row(j).transpose();
    o.x_star_stacked = flat.transpose().replicate(n, 1);
    o.available = true;
    return o;
  }

  double full(const std::vector<AgentState>& states) const {
    if (!available) return std::numeric_limits<double>::quiet_NaN();
    return (stack_estimates(states) - x_star_stacked).norm();
  }

  double own(const std::vector<AgentState>& states, int d) const {
    if (!available) return std::numeric_limits<double>::quiet_NaN();
    return (own_actions(states, d) - x_star).norm();
  }
};

}  // namespace detail

// One synchronous round of the recursion, drawing noise and compression
// randomness from the per-(agent, iteration, purpose) streams of p.seed.
inline detail::StepStats engine_step(std::vector<AgentState>& states,
                                     const Game& game, const MixingMatrix& graph,
                                     const RunParams& p, int k) {
  const int n = graph.size();
  const int m = game.num_agents() * game.action_dim();
  return detail::step_with_noise(states, game, graph, p, k,
                                 detail::draw_noise(p, n, m, k), nullptr);
}

inline RunResult run(const Game& game, const MixingMatrix& graph,
                     const RunParams& p, const Eigen::MatrixXd& x0,
                     const Eigen::MatrixXd& h0) {
  const int n = graph.size();
  const int d = game.action_dim();
  const int m = n * d;
  if (game.num_agents() != n)
    throw std::invalid_argument("run: game and graph disagree on n");
  p.validate(n);

  RunResult result;
  result.n = n;
  result.d = d;
  const detail::ResidualOracle oracle = detail::ResidualOracle::build(game);
  std::vector<AgentState> states = bootstrap(x0, h0, graph);
  result.initial_residual_full = oracle.full(states);
  result.initial_residual_own = oracle.own(states, d);
  result.trace.reserve(p.horizon);

  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t cum_bits = 0;
  for (int k = 0; k < p.horizon; ++k) {
    const detail::StepStats stats = detail::step_with_noise(
        states, game, graph, p, k, detail::draw_noise(p, n, m, k), nullptr);
    cum_bits += stats.bits;
    StepRecord rec;
    rec.k = k;
    rec.comp_gap = stats.comp_gap;
    rec.err_norm = stats.err_norm;
    rec.cum_bits = cum_bits;
    rec.residual_full = oracle.full(states);
    rec.residual_own = oracle.own(states, d);
    rec.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.trace.push_back(rec);
    const bool blown =
        !detail::state_sane(states) ||
        (oracle.available && rec.residual_full > 1e12);
    if (blown) {
      result.diverged_at = k;
      break;
    }
  }
  result.total_bits = cum_bits;
  result.final_states = std::move(states);
  return result;
}

struct CoupledRunResult {
  RunResult first;
  RunResult second;
  // l1 distance between the two runs' state of the differing agent at the
  // start of each iteration; the per-step quantity the noise coupling must
  // absorb.
  std::vector<double> delta_l1;
  double max_delta_l1 = 0.0;
};

// Runs two games in lockstep under the observation-preserving coupling: all
// compression streams are shared, every agent except i0 shares its noise, and
// agent i0's noise in the second run is shifted by the current state gap so
// both runs emit byte-identical messages. A payload mismatch means the
// coupling is broken and is reported as an error.
inline CoupledRunResult run_coupled_pair(const Game& game1, const Game& game2,
                                         const MixingMatrix& graph,
                                         const RunParams& p, int i0,
                                         const Eigen::MatrixXd& x0,
                                         const Eigen::MatrixXd& h0) {
  const int n = graph.size();
  const int d = game1.action_dim();
  const int m = n * d;
  if (game1.num_agents() != n || game2.num_agents() != n ||
      game2.action_dim() != d)
    throw std::invalid_argument("run_coupled_pair: game shape mismatch");
  if (i0 < 0 || i0 >= n)
    throw std::invalid_argument("run_coupled_pair: bad agent index");
  p.validate(n);

  CoupledRunResult out;
  const detail::ResidualOracle oracle1 = detail::ResidualOracle::build(game1);
  const detail::ResidualOracle oracle2 = detail::ResidualOracle::build(game2);
  std::vector<AgentState> s1 = bootstrap(x0, h0, graph);
  std::vector<AgentState> s2 = bootstrap(x0, h0, graph);
  out.first.n = out.second.n = n;
  out.first.d = out.second.d = d;
  out.first.initial_residual_full = oracle1.full(s1);
  out.second.initial_residual_full = oracle2.full(s2);

  std::vector<CompressedMessage> msgs1, msgs2;
  std::int64_t bits1 = 0, bits2 = 0;
  for (int k = 0; k < p.horizon; ++k) {
    const Eigen::VectorXd delta = s1[i0].x_est - s2[i0].x_est;
    const double dl1 = delta.lpNorm<1>();
    out.delta_l1.push_back(dl1);
    out.max_delta_l1 = std::max(out.max_delta_l1, dl1);

    const Eigen::MatrixXd noise1 = detail::draw_noise(p, n, m, k);
    // The bijection shifts agent i0's noise by the state gap so that both
    // runs perturb to the same point; inject that point bitwise so the
    // compressed observations coincide exactly, not merely to rounding.
    detail::PerturbedOverride coupled;
    coupled.agent = i0;
    coupled.value = s1[i0].x_est + noise1.row(i0).transpose();

    const detail::StepStats st1 =
        detail::step_with_noise(s1, game1, graph, p, k, noise1, &msgs1);
    const detail::StepStats st2 = detail::step_with_noise(
        s2, game2, graph, p, k, noise1, &msgs2, &coupled);
    bits1 += st1.bits;
    bits2 += st2.bits;
    for (int i = 0; i < n; ++i) {
      if (msgs1[i].payload != msgs2[i].payload)
        throw std::runtime_error(
            "run_coupled_pair: coupling broken, observation payloads differ "
            "at iteration " +
            std::to_string(k) + " agent " + std::to_string(i));
    }
    StepRecord r1, r2;
    r1.k = r2.k = k;
    r1.comp_gap = st1.comp_gap;
    r2.comp_gap = st2.comp_gap;
    r1.err_norm = st1.err_norm;
    r2.err_norm = st2.err_norm;
    r1.cum_bits = bits1;
    r2.cum_bits = bits2;
    r1.residual_full = oracle1.full(s1);
    r2.residual_full = oracle2.full(s2);
    r1.residual_own = oracle1.own(s1, d);
    r2.residual_own = oracle2.own(s2, d);
    out.first.trace.push_back(r1);
    out.second.trace.push_back(r2);
    if (!detail::state_sane(s1) || !detail::state_sane(s2)) {
      out.first.diverged_at = k;
      out.second.diverged_at = k;
      break;
    }
  }
  out.first.total_bits = bits1;
  out.second.total_bits = bits2;
  out.first.final_states = std::move(s1);
  out.second.final_states = std::move(s2);
  return out;
}

// Trace CSV, one row per executed iteration.
inline std::string trace_csv(const RunResult& result, std::uint64_t seed) {
  std::ostringstream os;
  os.precision(17);
  os << "k,residual,comp_gap,cum_bits,seed\n";
  for (const StepRecord& r : result.trace)
    os << r.k << "," << RunResult::reported_residual(r, result.d) << ","
       << r.comp_gap << "," << r.cum_bits << "," << seed << "\n";
  return os.str();
}

// Final estimates as a dense CSV matrix (one row per agent).
inline std::string states_csv(const RunResult& result) {
  std::ostringstream os;
  os.precision(17);
  const Eigen::MatrixXd x = stack_estimates(result.final_states);
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) os << (j ? "," : "") << x(i, j);
    os << "\n";
  }
  return os.str();
}

// Uniform random initial estimates in [lo, hi], one independent stream per
// agent so the layout is schedule-independent.
inline Eigen::MatrixXd random_initial_estimates(int n, int d, double lo,
                                                double hi, std::uint64_t seed) {
  Eigen::MatrixXd x0(n, n * d);
  for (int i = 0; i < n; ++i) {
    Rng rng = derive_stream(seed, static_cast<std::uint64_t>(i), 0,
                            StreamPurpose::kInit);
    for (int j = 0; j < n * d; ++j) x0(i, j) = rng.uniform(lo, hi);
  }
  return x0;
}

}  // namespace cdpnes
