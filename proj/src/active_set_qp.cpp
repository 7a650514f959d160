#include "lanechange/active_set_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lanechange {

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

// Plane rotation that maps (a, b) to (h, 0).
struct Givens {
  double c = 1.0;
  double s = 0.0;
  double h = 0.0;
};

Givens make_givens(double a, double b) {
  const double h = std::hypot(a, b);
  if (h == 0.0) return {1.0, 0.0, 0.0};
  return {a / h, b / h, h};
}

void rotate_columns(Eigen::MatrixXd& j, Eigen::Index a, Eigen::Index b, const Givens& g) {
  for (Eigen::Index r = 0; r < j.rows(); ++r) {
    const double x = j(r, a);
    const double y = j(r, b);
    j(r, a) = g.c * x + g.s * y;
    j(r, b) = -g.s * x + g.c * y;
  }
}

}  // namespace

QpSolution solve_dual_active_set(const InequalityQp& qp, const QpOptions& options) {
  const Eigen::Index n = qp.hessian.rows();
  const Eigen::Index rows = qp.a.rows();
  if (qp.hessian.cols() != n || qp.linear.size() != n || qp.a.cols() != n || qp.b.size() != rows) {
    throw std::invalid_argument("solve_dual_active_set: inconsistent dimensions");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(qp.hessian);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_dual_active_set: Hessian is not positive definite");
  }
  // J = L^{-T}, so J J' = H^{-1}. J' N = [R; 0] is maintained for the active normals N.
  Eigen::MatrixXd j = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index q = 0;
  const Eigen::VectorXd row_norm = qp.a.rowwise().norm().cwiseMax(1e-300);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  QpSolution sol;
  sol.z = -llt.solve(qp.linear);
  sol.multipliers = Eigen::VectorXd::Zero(rows);

  std::vector<int> work;
  std::vector<double> lambda;
  std::vector<char> in_work(static_cast<std::size_t>(rows), 0);

  auto drop = [&](Eigen::Index pos) {
    in_work[static_cast<std::size_t>(work[static_cast<std::size_t>(pos)])] = 0;
    work.erase(work.begin() + pos);
    lambda.erase(lambda.begin() + pos);
    for (Eigen::Index c = pos; c + 1 < q; ++c) r.col(c) = r.col(c + 1);
    r.col(q - 1).setZero();
    for (Eigen::Index c = pos; c + 1 < q; ++c) {
      const Givens g = make_givens(r(c, c), r(c + 1, c));
      for (Eigen::Index k = c; k + 1 < q; ++k) {
        const double x = r(c, k);
        const double y = r(c + 1, k);
        r(c, k) = g.c * x + g.s * y;
        r(c + 1, k) = -g.s * x + g.c * y;
      }
      rotate_columns(j, c, c + 1, g);
    }
    --q;
    r.row(q).setZero();
  };

  auto finish = [&](QpStatus status) {
    sol.status = status;
    sol.multipliers.setZero();
    for (std::size_t k = 0; k < work.size(); ++k) sol.multipliers[work[k]] = std::max(0.0, lambda[k]);
    sol.active = work;
    sol.objective = 0.5 * sol.z.dot(qp.hessian * sol.z) + qp.linear.dot(sol.z);
    return sol;
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    sol.iterations = iter;
    const Eigen::VectorXd slack = qp.a * sol.z - qp.b;
    int p = -1;
    double worst = -options.violation_tol;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (in_work[static_cast<std::size_t>(i)]) continue;
      const double s = slack[i] / row_norm[i];
      if (s < worst) {
        worst = s;
        p = static_cast<int>(i);
      }
    }
    if (p < 0) return finish(QpStatus::optimal);

    const Eigen::VectorXd ap = qp.a.row(p).transpose();
    double up = 0.0;
    bool added = false;
    for (int inner = 0; inner <= n + 1 && !added; ++inner) {
      Eigen::VectorXd d = j.transpose() * ap;
      const Eigen::VectorXd dir = j.rightCols(n - q) * d.tail(n - q);
      Eigen::VectorXd rr;
      if (q > 0) rr = r.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

      double t1 = kInf;
      Eigen::Index block = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (rr[k] > 1e-14) {
          const double ratio = lambda[static_cast<std::size_t>(k)] / rr[k];
          if (ratio < t1) {
            t1 = ratio;
            block = k;
          }
        }
      }
      const double curvature = d.tail(n - q).squaredNorm();
      const double sp = ap.dot(sol.z) - qp.b[p];
      double t2 = kInf;
      if (curvature > 1e-20 * d.squaredNorm()) t2 = -sp / curvature;

      if (!std::isfinite(t1) && !std::isfinite(t2)) {
        sol.blocking_row = p;
        return finish(QpStatus::infeasible);
      }
      const double t = std::min(t1, t2);
      if (std::isfinite(t2)) sol.z += t * dir;
      for (Eigen::Index k = 0; k < q; ++k) lambda[static_cast<std::size_t>(k)] -= t * rr[k];
      up += t;
      if (t2 <= t1) {
        for (Eigen::Index c = n - 1; c > q; --c) {
          const Givens g = make_givens(d[c - 1], d[c]);
          d[c - 1] = g.h;
          d[c] = 0.0;
          rotate_columns(j, c - 1, c, g);
        }
        r.col(q).head(q + 1) = d.head(q + 1);
        ++q;
        work.push_back(p);
        lambda.push_back(up);
        in_work[static_cast<std::size_t>(p)] = 1;
        added = true;
      } else {
        drop(block);
      }
    }
    if (!added) return finish(QpStatus::iteration_limit);
  }
  return finish(QpStatus::iteration_limit);
}

KktResiduals kkt_residuals(const InequalityQp& qp, const QpSolution& sol) {
  KktResiduals k;
  const Eigen::VectorXd grad = qp.hessian * sol.z + qp.linear - qp.a.transpose() * sol.multipliers;
  k.stationarity = grad.cwiseAbs().maxCoeff();
  const Eigen::VectorXd slack = qp.a * sol.z - qp.b;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    k.primal = std::max(k.primal, -slack[i]);
    k.dual = std::max(k.dual, -sol.multipliers[i]);
    k.complementarity = std::max(k.complementarity, std::abs(sol.multipliers[i] * slack[i]));
  }
  return k;
}

}  // namespace lanechange
