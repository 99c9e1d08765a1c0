#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cdpnes/engine.hpp"
#include "cdpnes/games.hpp"

namespace cdpnes {

// Agents whose cost differs between the two games. Affine games are compared
// structurally; anything else is probed at random profiles.
inline std::vector<int> differing_agents(const Game& g1, const Game& g2,
                                         std::uint64_t seed = 0,
                                         int probes = 32) {
  if (g1.num_agents() != g2.num_agents() || g1.action_dim() != g2.action_dim())
    throw std::invalid_argument("differing_agents: game shapes differ");
  const int n = g1.num_agents(), d = g1.action_dim();
  std::vector<int> diff;
  const AffineGradientStructure* a1 = g1.affine();
  const AffineGradientStructure* a2 = g2.affine();
  if (a1 && a2) {
    for (int i = 0; i < n; ++i) {
      const bool same =
          a1->A.middleRows(i * d, d) == a2->A.middleRows(i * d, d) &&
          a1->b.segment(i * d, d) == a2->b.segment(i * d, d);
      if (!same) diff.push_back(i);
    }
    return diff;
  }
  Rng rng = derive_stream(seed, 0, 0, StreamPurpose::kEstimate);
  std::vector<bool> differs(n, false);
  for (int p = 0; p < probes; ++p) {
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < d; ++t) x(i, t) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      if (differs[i]) continue;
      const Eigen::VectorXd u = g1.partial_gradient(i, x);
      const Eigen::VectorXd v = g2.partial_gradient(i, x);
      if ((u - v).lpNorm<Eigen::Infinity>() >
          1e-12 * (1.0 + u.lpNorm<Eigen::Infinity>()))
        differs[i] = true;
    }
  }
  for (int i = 0; i < n; ++i)
    if (differs[i]) diff.push_back(i);
  return diff;
}

struct SensitivityCheckResult {
  int i0 = 0;                // differing agent (0 when the games are identical)
  double max_step_l1 = 0.0;  // max_k l1 state gap the coupling had to absorb
  double bound = 0.0;        // 2 * gamma * eta * M
  double m_used = 0.0;
  bool within_bound = false;
};

// Adjacent-game sensitivity harness: runs the observation-preserving coupled
// pair and compares the worst per-step l1 state deviation of the differing
// agent against 2*gamma*eta*M. The gradient bound M is taken over the games'
// own constraint box when present, otherwise over sample_box.
inline SensitivityCheckResult step_sensitivity_check(
    const Game& g1, const Game& g2, const MixingMatrix& graph,
    const RunParams& params, const Eigen::MatrixXd& x0,
    const Eigen::MatrixXd& h0, const BoxConstraint* sample_box = nullptr) {
  const std::vector<int> diff = differing_agents(g1, g2);
  if (diff.size() > 1)
    throw std::invalid_argument(
        "step_sensitivity_check: games are not adjacent (differ at " +
        std::to_string(diff.size()) + " agents)");
  SensitivityCheckResult res;
  res.i0 = diff.empty() ? 0 : diff.front();

  const BoxConstraint fallback =
      sample_box ? *sample_box
                 : BoxConstraint::cube(g1.action_dim(), -1.0, 1.0);
  if (!sample_box && !g1.constraint())
    throw std::invalid_argument(
        "step_sensitivity_check: need a constraint box or sample_box for M");
  const GameConstants c1 = estimate_constants(g1, fallback, 1000, params.seed);
  const GameConstants c2 = estimate_constants(g2, fallback, 1000, params.seed);
  res.m_used = std::max(c1.M, c2.M);
  res.bound = 2.0 * params.gamma * params.eta * res.m_used;

  const CoupledRunResult coupled =
      run_coupled_pair(g1, g2, graph, params, res.i0, x0, h0);
  res.max_step_l1 = coupled.max_delta_l1;
  res.within_bound = res.max_step_l1 <= res.bound + 1e-9;
  return res;
}

}  // namespace cdpnes
