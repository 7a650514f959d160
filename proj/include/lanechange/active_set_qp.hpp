#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lanechange {

/// min 0.5 z'Hz + c'z  s.t.  A z >= b, with H symmetric positive definite.
struct InequalityQp {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

struct QpOptions {
  double violation_tol = 1e-10;  // relative to the row norm
  int max_iterations = 2000;
};

enum class QpStatus { optimal, infeasible, iteration_limit };

std::string to_string(QpStatus status);

struct QpSolution {
  QpStatus status = QpStatus::iteration_limit;
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;  // one per row of A, zero when inactive
  std::vector<int> active;
  double objective = 0.0;
  int iterations = 0;
  int blocking_row = -1;  // most violated row when infeasible
};

/// Goldfarb-Idnani dual active-set method. Starts at the unconstrained minimiser and adds
/// violated rows one at a time while keeping the multipliers dual feasible, so an infeasible
/// program is detected when a violated row cannot be satisfied.
QpSolution solve_dual_active_set(const InequalityQp& qp, const QpOptions& options = {});

struct KktResiduals {
  double stationarity = 0.0;  // ||Hz + c - A'lambda||_inf
  double primal = 0.0;        // max(b - Az, 0)
  double dual = 0.0;          // max(-lambda, 0)
  double complementarity = 0.0;
};

KktResiduals kkt_residuals(const InequalityQp& qp, const QpSolution& sol);

}  // namespace lanechange
