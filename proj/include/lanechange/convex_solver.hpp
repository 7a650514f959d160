#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lanechange {

/// f(z) = sum_i 0.5 * quad_i * z_i^2 + linear . z + constant, with quad_i >= 0.
struct SeparableQuadratic {
  Eigen::VectorXd quad;
  Eigen::VectorXd linear;
  double constant = 0.0;

  static SeparableQuadratic zero(int n);
  double value(const Eigen::VectorXd& z) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const;
};

/// Convex constraint g(z) <= 0.
struct ConvexConstraint {
  std::string label;
  SeparableQuadratic g;
};

struct ConvexProblem {
  int num_vars = 0;
  SeparableQuadratic objective;
  std::vector<ConvexConstraint> constraints;
};

struct ConvexSolverOptions {
  double feasibility_tol = 1e-7;  // in units of the (normalised) constraint functions
  double gap_abs_tol = 1e-9;
  double gap_rel_tol = 1e-9;
  double barrier_growth = 20.0;
  int max_newton_steps = 600;
};

enum class ConvexStatus { optimal, infeasible, iteration_limit };

std::string to_string(ConvexStatus status);

struct ConvexSolution {
  ConvexStatus status = ConvexStatus::iteration_limit;
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  double phase1_value = 0.0;  // minimal max-violation found by the feasibility phase
  int newton_steps = 0;
};

/// Log-barrier interior point method with a feasibility phase. The feasibility phase minimises
/// the common slack s subject to g_i(z) <= s; a strictly positive optimum certifies
/// infeasibility because the problem is convex.
ConvexSolution solve_convex(const ConvexProblem& problem, const Eigen::VectorXd& start,
                            const ConvexSolverOptions& options = {});

/// Largest positive constraint value at z.
double max_violation(const ConvexProblem& problem, const Eigen::VectorXd& z);

/// ||grad f + sum lambda_i grad g_i||_inf.
double stationarity_residual(const ConvexProblem& problem, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& multipliers);

}  // namespace lanechange
