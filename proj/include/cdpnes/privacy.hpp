#pragma once

#include <Eigen/Dense>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cdpnes/rng.hpp"

namespace cdpnes {

// Per-agent Laplace scales. theta_i == 0 disables noise for that agent (the
// noiseless compressed baseline).
struct NoiseParams {
  Eigen::VectorXd theta;

  static NoiseParams zero(int n) { return {Eigen::VectorXd::Zero(n)}; }
  static NoiseParams uniform(int n, double theta_val) {
    if (theta_val < 0.0)
      throw std::invalid_argument("NoiseParams: theta must be >= 0");
    return {Eigen::VectorXd::Constant(n, theta_val)};
  }

  double theta_bar() const { return theta.size() ? theta.maxCoeff() : 0.0; }
};

// Inputs of the cumulative privacy budget over a finite horizon.
struct PrivacyBudget {
  Eigen::VectorXd epsilon;  // per agent, > 0
  int horizon = 0;          // iterations K
  double M = 0.0;           // l1 gradient bound
  double gamma = 0.0;
  double eta = 0.0;
};

inline Eigen::MatrixXd laplace_sample(double theta, int rows, int cols,
                                      Rng& rng) {
  if (theta < 0.0)
    throw std::invalid_argument("laplace_sample: theta must be >= 0");
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = rng.laplace(theta);
  return out;
}

// Smallest admissible noise scale per agent, 2*gamma*eta*K*M / epsilon_i.
// The privacy guarantee needs a strictly larger theta_i; callers default to
// a 1.01x safety factor.
inline Eigen::VectorXd min_noise_scale(const PrivacyBudget& budget) {
  if (budget.horizon < 0)
    throw std::invalid_argument("min_noise_scale: negative horizon");
  if ((budget.epsilon.array() <= 0.0).any())
    throw std::invalid_argument("min_noise_scale: epsilon must be > 0");
  if (budget.M < 0.0 || budget.gamma < 0.0 || budget.eta < 0.0)
    throw std::invalid_argument("min_noise_scale: negative budget field");
  const double num =
      2.0 * budget.gamma * budget.eta * static_cast<double>(budget.horizon) *
      budget.M;
  return num * budget.epsilon.cwiseInverse();
}

constexpr double kNoiseSafetyFactor = 1.01;

struct BudgetReportRow {
  int agent;
  double epsilon;
  double theta_min;
  double theta_chosen;
};

inline std::vector<BudgetReportRow> budget_report(const PrivacyBudget& budget,
                                                  double safety = kNoiseSafetyFactor) {
  const Eigen::VectorXd tmin = min_noise_scale(budget);
  std::vector<BudgetReportRow> rows;
  rows.reserve(tmin.size());
  for (int i = 0; i < tmin.size(); ++i)
    rows.push_back({i, budget.epsilon(i), tmin(i), safety * tmin(i)});
  return rows;
}

inline std::string budget_report_csv(const std::vector<BudgetReportRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "agent,epsilon,theta_min,theta_chosen\n";
  for (const auto& r : rows)
    os << r.agent << "," << r.epsilon << "," << r.theta_min << ","
       << r.theta_chosen << "\n";
  return os.str();
}

}  // namespace cdpnes
