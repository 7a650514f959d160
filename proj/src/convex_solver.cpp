#include "lanechange/convex_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace lanechange {

SeparableQuadratic SeparableQuadratic::zero(int n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0.0};
}

double SeparableQuadratic::value(const Eigen::VectorXd& z) const {
  return 0.5 * (quad.array() * z.array().square()).sum() + linear.dot(z) + constant;
}

Eigen::VectorXd SeparableQuadratic::gradient(const Eigen::VectorXd& z) const {
  return (quad.array() * z.array()).matrix() + linear;
}

std::string to_string(ConvexStatus status) {
  switch (status) {
    case ConvexStatus::optimal: return "optimal";
    case ConvexStatus::infeasible: return "infeasible";
    case ConvexStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

double max_violation(const ConvexProblem& problem, const Eigen::VectorXd& z) {
  double worst = 0.0;
  for (const auto& c : problem.constraints) worst = std::max(worst, c.g.value(z));
  return worst;
}

double stationarity_residual(const ConvexProblem& problem, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& multipliers) {
  Eigen::VectorXd r = problem.objective.gradient(z);
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    r += multipliers[static_cast<Eigen::Index>(i)] * problem.constraints[i].g.gradient(z);
  }
  return r.cwiseAbs().maxCoeff();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BarrierState {
  Eigen::VectorXd w;
  double t = 1.0;
  bool converged = false;
};

// Minimises obj subject to g_i(w) - shift <= 0 from a strictly feasible w. `stop_early`
// lets the feasibility phase quit as soon as it has found enough interior.
BarrierState run_barrier(const SeparableQuadratic& obj, const std::vector<SeparableQuadratic>& cons,
                         double shift, Eigen::VectorXd w, double t0,
                         const ConvexSolverOptions& opt, int& steps,
                         const std::function<bool(const Eigen::VectorXd&)>& stop_early) {
  const Eigen::Index d = w.size();
  const double mc = static_cast<double>(cons.size());
  BarrierState st;
  st.w = std::move(w);
  st.t = t0;

  auto phi = [&](const Eigen::VectorXd& x, double t) {
    double acc = t * obj.value(x);
    for (const auto& g : cons) {
      const double v = g.value(x) - shift;
      if (!(v < 0.0)) return kInf;
      acc -= std::log(-v);
    }
    return acc;
  };

  if (cons.empty()) {
    // Unconstrained separable quadratic with positive curvature.
    for (Eigen::Index i = 0; i < d; ++i) {
      if (obj.quad[i] > 0.0) st.w[i] = -obj.linear[i] / obj.quad[i];
    }
    st.converged = true;
    return st;
  }

  std::vector<double> gv(cons.size());
  while (true) {
    // Centering by damped Newton. The stationarity residual scales with sqrt(dec) times the
    // multipliers, so keep going well past the usual stopping point while dec still shrinks.
    double prev_dec = kInf;
    for (int it = 0; it < 100; ++it) {
      if (steps >= opt.max_newton_steps) return st;
      ++steps;
      Eigen::VectorXd grad = st.t * obj.gradient(st.w);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
      hess.diagonal() += st.t * obj.quad;
      for (std::size_t i = 0; i < cons.size(); ++i) {
        gv[i] = cons[i].value(st.w) - shift;
        const Eigen::VectorXd gg = cons[i].gradient(st.w);
        const double inv = 1.0 / (-gv[i]);
        grad += inv * gg;
        hess.noalias() += (inv * inv) * gg * gg.transpose();
        hess.diagonal() += inv * cons[i].quad;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().minCoeff());
        ldlt.compute(hess);
      }
      const Eigen::VectorXd step = -ldlt.solve(grad);
      const double dec = -grad.dot(step);
      if (!std::isfinite(dec) || dec / 2.0 <= 1e-22) break;
      if (dec < 1e-12 && dec > 0.25 * prev_dec) break;
      prev_dec = dec;

      const double f0 = phi(st.w, st.t);
      double s = 1.0;
      bool moved = false;
      if (dec < 0.05) {
        // Quadratic convergence region of the self-concordant barrier: the full step is safe
        // and an Armijo test would only measure round-off of t * f.
        const Eigen::VectorXd cand = st.w + step;
        if (std::isfinite(phi(cand, st.t))) {
          st.w = cand;
          if (stop_early && stop_early(st.w)) {
            st.converged = true;
            return st;
          }
          continue;
        }
      }
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd cand = st.w + s * step;
        const double f1 = phi(cand, st.t);
        if (std::isfinite(f1) && f1 <= f0 - 0.25 * s * dec) {
          st.w = cand;
          moved = true;
          break;
        }
        s *= 0.5;
      }
      if (!moved) break;
      if (stop_early && stop_early(st.w)) {
        st.converged = true;
        return st;
      }
    }
    const double target = std::max(opt.gap_abs_tol, opt.gap_rel_tol * std::abs(obj.value(st.w)));
    if (mc / st.t <= target) {
      st.converged = true;
      return st;
    }
    st.t *= opt.barrier_growth;
  }
}

// Newton on the KKT system of the constraints the barrier left nearly active. Returns false
// when the active set guess does not reproduce a KKT point.
bool polish(const ConvexProblem& problem, Eigen::VectorXd& z, Eigen::VectorXd& lambda) {
  const auto& cons = problem.constraints;
  const double lmax = std::max(1.0, lambda.maxCoeff());
  std::vector<std::size_t> act;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (cons[i].g.value(z) >= -1e-6 && lambda[ii] >= 1e-9 * lmax) act.push_back(i);
  }
  const Eigen::Index n = z.size();
  const auto q = static_cast<Eigen::Index>(act.size());
  if (q > n) return false;
  Eigen::VectorXd zz = z;
  Eigen::VectorXd la(q);
  for (Eigen::Index k = 0; k < q; ++k) la[k] = lambda[static_cast<Eigen::Index>(act[k])];
  for (int it = 0; it < 8; ++it) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + q, n + q);
    Eigen::VectorXd rhs(n + q);
    kkt.topLeftCorner(n, n).diagonal() = problem.objective.quad;
    rhs.head(n) = -problem.objective.gradient(zz);
    for (Eigen::Index k = 0; k < q; ++k) {
      const auto& g = cons[act[static_cast<std::size_t>(k)]].g;
      kkt.topLeftCorner(n, n).diagonal() += la[k] * g.quad;
      const Eigen::VectorXd gg = g.gradient(zz);
      kkt.block(n + k, 0, 1, n) = gg.transpose();
      kkt.block(0, n + k, n, 1) = gg;
      rhs[n + k] = -g.value(zz);
    }
    // Right-hand side -grad f (not the full Lagrangian gradient) makes the solve return the
    // updated multipliers directly.
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    const Eigen::VectorXd dz = sol.head(n);
    zz += dz;
    la = sol.tail(q);
    if (dz.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, zz.cwiseAbs().maxCoeff())) break;
  }
  if (q > 0 && la.minCoeff() < -1e-10) return false;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index k = 0; k < q; ++k) full[static_cast<Eigen::Index>(act[static_cast<std::size_t>(k)])] = std::max(0.0, la[k]);
  if (max_violation(problem, zz) > 1e-12) return false;
  if (stationarity_residual(problem, zz, full) > stationarity_residual(problem, z, lambda)) return false;
  z = zz;
  lambda = full;
  return true;
}

}  // namespace

ConvexSolution solve_convex(const ConvexProblem& problem, const Eigen::VectorXd& start,
                            const ConvexSolverOptions& options) {
  const int n = problem.num_vars;
  ConvexSolution sol;
  sol.z = start;
  sol.multipliers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.constraints.size()));

  std::vector<SeparableQuadratic> cons;
  cons.reserve(problem.constraints.size());
  for (const auto& c : problem.constraints) cons.push_back(c.g);

  if (n == 0) {
    sol.max_violation = max_violation(problem, sol.z);
    sol.objective = problem.objective.constant;
    sol.status = sol.max_violation <= options.feasibility_tol ? ConvexStatus::optimal
                                                              : ConvexStatus::infeasible;
    return sol;
  }

  // The unconstrained minimiser is optimal whenever it is feasible.
  if ((problem.objective.quad.array() > 0.0).all()) {
    Eigen::VectorXd zu = (-problem.objective.linear.array() / problem.objective.quad.array()).matrix();
    if (max_violation(problem, zu) <= 1e-12) {
      sol.status = ConvexStatus::optimal;
      sol.z = zu;
      sol.objective = problem.objective.value(zu);
      sol.max_violation = max_violation(problem, zu);
      sol.stationarity = stationarity_residual(problem, zu, sol.multipliers);
      return sol;
    }
  }

  Eigen::VectorXd z = start;
  double shift = 0.0;
  double interior = -kInf;  // max g_i(z), negative when strictly feasible
  for (const auto& g : cons) interior = std::max(interior, g.value(z));

  if (!(interior < -1e-9)) {
    // Feasibility phase over w = (z, s): minimise s s.t. g_i(z) <= s, s >= -1.
    std::vector<SeparableQuadratic> pcons;
    pcons.reserve(cons.size() + 1);
    for (const auto& g : cons) {
      SeparableQuadratic h = SeparableQuadratic::zero(n + 1);
      h.quad.head(n) = g.quad;
      h.linear.head(n) = g.linear;
      h.linear[n] = -1.0;
      h.constant = g.constant;
      pcons.push_back(std::move(h));
    }
    SeparableQuadratic floor = SeparableQuadratic::zero(n + 1);
    floor.linear[n] = -1.0;
    floor.constant = -1.0;
    pcons.push_back(floor);
    SeparableQuadratic pobj = SeparableQuadratic::zero(n + 1);
    pobj.linear[n] = 1.0;

    Eigen::VectorXd w(n + 1);
    w.head(n) = z;
    w[n] = std::max(interior, 0.0) + 1.0;
    ConvexSolverOptions popt = options;
    popt.gap_abs_tol = 1e-11;
    popt.gap_rel_tol = 0.0;
    const double t0 = static_cast<double>(pcons.size()) / (w[n] + 1.0);
    auto enough = [n](const Eigen::VectorXd& x) { return x[n] < -1e-2; };
    const auto ph = run_barrier(pobj, pcons, 0.0, w, t0, popt, sol.newton_steps, enough);
    z = ph.w.head(n);
    interior = -kInf;
    for (const auto& g : cons) interior = std::max(interior, g.value(z));
    sol.phase1_value = interior;
    if (!ph.converged && !(interior < -1e-9)) {
      sol.status = ConvexStatus::iteration_limit;
      sol.z = z;
      sol.max_violation = max_violation(problem, z);
      return sol;
    }
    if (interior > options.feasibility_tol) {
      sol.status = ConvexStatus::infeasible;
      sol.z = z;
      sol.max_violation = max_violation(problem, z);
      return sol;
    }
    if (!(interior < -1e-9)) {
      // Interior too thin to start from: relax every constraint by a hair.
      shift = interior + 1e-9;
    }
  } else {
    sol.phase1_value = interior;
  }

  const double f0 = problem.objective.value(z);
  const double mc = static_cast<double>(cons.size());
  const double t0 = mc / std::max(std::abs(f0), 1e-6);
  const auto run = run_barrier(problem.objective, cons, shift, z, t0, options, sol.newton_steps, {});
  sol.z = run.w;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const double v = cons[i].value(sol.z) - shift;
    sol.multipliers[static_cast<Eigen::Index>(i)] = 1.0 / (run.t * std::max(-v, 1e-300));
  }
  if (run.converged) polish(problem, sol.z, sol.multipliers);
  sol.objective = problem.objective.value(sol.z);
  sol.max_violation = max_violation(problem, sol.z);
  sol.stationarity = stationarity_residual(problem, sol.z, sol.multipliers);
  sol.status = run.converged ? ConvexStatus::optimal : ConvexStatus::iteration_limit;
  return sol;
}

}  // namespace lanechange
