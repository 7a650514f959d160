#include "lanechange/terminal_coordination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "lanechange/reachability.hpp"
#include "lanechange/scalar_search.hpp"

namespace lanechange {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Term = RowVehicle;

Term var_term(int xi, int vi, std::string name) { return RowVehicle::variable(xi, vi, std::move(name)); }
Term fixed_term(const VehicleState& s, std::string name) { return RowVehicle::constant(s, std::move(name)); }

// (x_f + phi v_f + eps - x_l - relax) / eps <= 0
ConvexConstraint gap_row(int n, const Term& leader, const Term& follower, const SafetyParams& s,
                         const std::string& kind, double relax = 0.0) {
  return make_gap_row(n, leader, follower, s, kind, relax);
}

}  // namespace

ConvexConstraint make_gap_row(int n, const RowVehicle& leader, const RowVehicle& follower,
                              const SafetyParams& s, const std::string& kind, double relax) {
  SeparableQuadratic g = SeparableQuadratic::zero(n);
  const double inv = 1.0 / s.epsilon;
  g.constant = (s.epsilon - relax) * inv;
  if (follower.xi >= 0) {
    g.linear[follower.xi] += inv;
    g.linear[follower.vi] += s.phi * inv;
  } else {
    g.constant += (follower.fixed.position + s.phi * follower.fixed.speed) * inv;
  }
  if (leader.xi >= 0) {
    g.linear[leader.xi] -= inv;
  } else {
    g.constant -= leader.fixed.position * inv;
  }
  return {kind + ":" + leader.name + "-" + follower.name, std::move(g)};
}

void add_vehicle_rows(std::vector<ConvexConstraint>& out, int n, const RowVehicle& t,
                      const VehicleState& origin, double t_f, const ActuationLimits& limits) {
  const auto rp = ReachabilityParams::from_limits(limits);
  const double mu = rp.mu;
  const double nu = rp.nu;
  const double scale = 1.0 / std::max(1.0, 0.5 * t_f * t_f);
  const double drift = origin.position + t_f * origin.speed + 0.5 * nu * t_f * t_f;

  // p_upper <= 0: -t^2/2 + 1/4 (v/mu + c1)^2 - (x - drift)/mu
  {
    const double c1 = (-origin.speed - nu * t_f) / mu + t_f;
    SeparableQuadratic g = SeparableQuadratic::zero(n);
    g.quad[t.vi] = scale / (2.0 * mu * mu);
    g.linear[t.vi] = scale * c1 / (2.0 * mu);
    g.linear[t.xi] = -scale / mu;
    g.constant = scale * (-0.5 * t_f * t_f + 0.25 * c1 * c1 + drift / mu);
    out.push_back({"reach_upper:" + t.name, std::move(g)});
  }
  // -p_lower <= 0: -t^2/2 + 1/4 (-v/mu + c2)^2 + (x - drift)/mu
  {
    const double c2 = (origin.speed + nu * t_f) / mu + t_f;
    SeparableQuadratic g = SeparableQuadratic::zero(n);
    g.quad[t.vi] = scale / (2.0 * mu * mu);
    g.linear[t.vi] = -scale * c2 / (2.0 * mu);
    g.linear[t.xi] = scale / mu;
    g.constant = scale * (-0.5 * t_f * t_f + 0.25 * c2 * c2 - drift / mu);
    out.push_back({"reach_lower:" + t.name, std::move(g)});
  }
  const double range = limits.v_max - limits.v_min;
  {
    SeparableQuadratic g = SeparableQuadratic::zero(n);
    g.linear[t.vi] = 1.0 / range;
    g.constant = -limits.v_max / range;
    out.push_back({"speed_max:" + t.name, std::move(g)});
  }
  {
    SeparableQuadratic g = SeparableQuadratic::zero(n);
    g.linear[t.vi] = -1.0 / range;
    g.constant = limits.v_min / range;
    out.push_back({"speed_min:" + t.name, std::move(g)});
  }
}

namespace {

// Shared by the enumerated and the big-M builders. `order` emits the ego/cooperator ordering
// rows for cooperator i.
template <typename OrderRows>
ConvexProblem build_system(const Scenario& s, double t_f, const std::optional<VehicleState>& ego,
                           OrderRows&& order) {
  if (!(t_f > 0.0)) throw std::invalid_argument("terminal time must be positive");
  TerminalLayout layout{s.cooperator_count(), !ego.has_value()};
  const int n = layout.num_vars();
  const int m = layout.m;
  ConvexProblem p;
  p.num_vars = n;
  p.objective = SeparableQuadratic::zero(n);

  auto coop = [&](int i) { return var_term(layout.x(i), layout.v(i), std::to_string(i)); };
  const Term c = ego ? fixed_term(*ego, "C") : var_term(layout.ego_x(), layout.ego_v(), "C");
  std::optional<Term> f;
  std::optional<Term> b;
  if (s.front) f = fixed_term(predict_uncontrolled(*s.front, t_f), "F");
  if (s.back) b = fixed_term(predict_uncontrolled(*s.back, t_f), "B");

  auto& rows = p.constraints;
  if (f && m >= 1) rows.push_back(gap_row(n, *f, coop(1), s.safety, "gap"));
  for (int i = 1; i < m; ++i) rows.push_back(gap_row(n, coop(i), coop(i + 1), s.safety, "gap"));
  if (b && m >= 1) rows.push_back(gap_row(n, coop(m), *b, s.safety, "gap"));
  if (f) rows.push_back(gap_row(n, *f, c, s.safety, "gap"));
  if (b) rows.push_back(gap_row(n, c, *b, s.safety, "gap"));
  for (int i = 1; i <= m; ++i) order(rows, n, coop(i), c, i);
  for (int i = 1; i <= m; ++i) {
    add_vehicle_rows(rows, n, coop(i), s.cooperators[static_cast<std::size_t>(i - 1)], t_f, s.limits);
  }
  if (!ego) {
    add_vehicle_rows(rows, n, c, s.ego, t_f, s.limits);
    const Term u = fixed_term(predict_uncontrolled(s.uncontrolled, t_f), "U");
    rows.push_back(gap_row(n, u, c, s.safety, "gap"));
  }
  return p;
}

bool better(double obj, int slot, double best_obj, int best_slot) {
  const double tol = 1e-12 * std::max(1.0, std::abs(best_obj));
  if (obj < best_obj - tol) return true;
  if (obj > best_obj + tol) return false;
  return slot < best_slot;
}

TerminalPlan make_plan(const Scenario& s, double t_f, int slot, const Eigen::VectorXd& z,
                       const std::optional<VehicleState>& ego, const DisruptionSettings& settings) {
  TerminalLayout layout{s.cooperator_count(), !ego.has_value()};
  TerminalPlan plan;
  plan.t_f = t_f;
  plan.slot = slot;
  plan.ego_terminal = ego ? *ego : VehicleState{z[layout.ego_x()], z[layout.ego_v()]};
  for (int i = 1; i <= layout.m; ++i) {
    plan.cooperator_terminals.push_back({z[layout.x(i)], z[layout.v(i)]});
  }
  const auto weights = cooperator_weights(settings, s);
  plan.report = evaluate_disruption(s.cooperators, plan.cooperator_terminals, t_f, weights, slot);
  plan.objective = plan.report.global;
  if (!ego) {
    plan.ego_disruption =
        total_disruption(s.ego, plan.ego_terminal, t_f, weights_for(settings, s.ego, s.limits));
    plan.objective += settings.gamma_t * t_f + plan.ego_disruption;
  }
  return plan;
}

CoordinationOutcome enumerate_slots(const Scenario& s, double t_f,
                                    const std::optional<VehicleState>& ego,
                                    const DisruptionSettings& settings, const SolverConfig& cfg) {
  CoordinationOutcome out;
  const int m = s.cooperator_count();
  const auto objective = disruption_objective(s, t_f, settings, !ego.has_value());
  const auto starts = default_starts(s, t_f, settings, ego);
  double best = kInf;
  int best_slot = -1;
  bool failure = false;
  Eigen::VectorXd best_z;
  for (int k = 0; k <= m; ++k) {
    ConvexProblem p = build_constraints(s, k, t_f, ego);
    p.objective = objective;
    const InnerResult r = inner_solve(p, starts, cfg.inner);
    out.inner_solves += r.starts_used;
    out.slots.push_back({k, r.status, r.objective});
    if (r.status == ConvexStatus::iteration_limit) failure = true;
    if (r.status != ConvexStatus::optimal) continue;
    if (best_slot < 0 || better(r.objective, k, best, best_slot)) {
      best = r.objective;
      best_slot = k;
      best_z = r.z;
    }
  }
  if (best_slot < 0) {
    out.status = failure ? CoordinationStatus::solver_failure : CoordinationStatus::infeasible;
    return out;
  }
  out.status = CoordinationStatus::feasible;
  out.plan = make_plan(s, t_f, best_slot, best_z, ego, settings);
  return out;
}

}  // namespace

VehicleState tracking_endpoint(const VehicleState& origin, double v_d, double t,
                               const ActuationLimits& limits) {
  const double u = std::clamp((v_d - origin.speed) / t, limits.u_min, limits.u_max);
  return constant_control_endpoint(origin, u, t);
}

void add_disruption_term(SeparableQuadratic& q, int xi, int vi, const VehicleState& initial, double t,
                    const DisruptionWeights& w) {
  const double xhat = initial.position + initial.speed * t;
  q.quad[xi] += 2.0 * w.gamma_x;
  q.linear[xi] += -2.0 * w.gamma_x * xhat;
  q.constant += w.gamma_x * xhat * xhat;
  q.quad[vi] += 2.0 * w.gamma_v;
  q.linear[vi] += -2.0 * w.gamma_v * w.v_d;
  q.constant += w.gamma_v * w.v_d * w.v_d;
}

std::vector<int> slot_to_binaries(int slot, int m) {
  if (m < 0 || slot < 0 || slot > m) throw std::out_of_range("slot out of range");
  std::vector<int> b(static_cast<std::size_t>(m), 0);
  for (int i = slot + 1; i <= m; ++i) b[static_cast<std::size_t>(i - 1)] = 1;
  return b;
}

ConvexProblem build_constraints(const Scenario& scenario, int slot, double t_f,
                                const std::optional<VehicleState>& ego_terminal) {
  const int m = scenario.cooperator_count();
  if (slot < 0 || slot > m) throw std::out_of_range("slot out of range");
  return build_system(scenario, t_f, ego_terminal,
                      [&](std::vector<ConvexConstraint>& rows, int n, const Term& ci, const Term& c, int i) {
                        if (i <= slot) {
                          rows.push_back(gap_row(n, ci, c, scenario.safety, "order"));
                        } else {
                          rows.push_back(gap_row(n, c, ci, scenario.safety, "order"));
                        }
                      });
}

ConvexProblem build_big_m_constraints(const Scenario& scenario, std::span<const int> binaries,
                                      double t_f, const std::optional<VehicleState>& ego_terminal,
                                      double big_m) {
  if (static_cast<int>(binaries.size()) != scenario.cooperator_count()) {
    throw std::invalid_argument("binary vector length must equal the cooperator count");
  }
  return build_system(
      scenario, t_f, ego_terminal,
      [&](std::vector<ConvexConstraint>& rows, int n, const Term& ci, const Term& c, int i) {
        const double bi = binaries[static_cast<std::size_t>(i - 1)];
        rows.push_back(gap_row(n, ci, c, scenario.safety, "order", big_m * bi));
        rows.push_back(gap_row(n, c, ci, scenario.safety, "order", big_m * (1.0 - bi)));
      });
}

SeparableQuadratic disruption_objective(const Scenario& scenario, double t_f,
                                        const DisruptionSettings& settings, bool ego_free) {
  TerminalLayout layout{scenario.cooperator_count(), ego_free};
  SeparableQuadratic q = SeparableQuadratic::zero(layout.num_vars());
  for (int i = 1; i <= layout.m; ++i) {
    const auto& init = scenario.cooperators[static_cast<std::size_t>(i - 1)];
    add_disruption_term(q, layout.x(i), layout.v(i), init, t_f, weights_for(settings, init, scenario.limits));
  }
  if (ego_free) {
    add_disruption_term(q, layout.ego_x(), layout.ego_v(), scenario.ego, t_f,
                   weights_for(settings, scenario.ego, scenario.limits));
  }
  return q;
}

InnerResult inner_solve(const ConvexProblem& problem, std::span<const Eigen::VectorXd> starts,
                        const ConvexSolverOptions& options) {
  InnerResult best;
  best.objective = kInf;
  bool any_infeasible = false;
  for (const auto& start : starts) {
    ++best.starts_used;
    const ConvexSolution sol = solve_convex(problem, start, options);
    if (sol.status == ConvexStatus::infeasible) {
      // Infeasibility is a property of the convex set, not of the start point.
      any_infeasible = true;
      break;
    }
    if (sol.status == ConvexStatus::optimal && sol.objective < best.objective) {
      best.status = ConvexStatus::optimal;
      best.z = sol.z;
      best.objective = sol.objective;
      best.max_violation = sol.max_violation;
      best.stationarity = sol.stationarity;
      break;
    }
  }
  if (best.status != ConvexStatus::optimal) {
    best.status = any_infeasible ? ConvexStatus::infeasible : ConvexStatus::iteration_limit;
  }
  return best;
}

std::vector<Eigen::VectorXd> default_starts(const Scenario& scenario, double t_f,
                                            const DisruptionSettings& settings,
                                            const std::optional<VehicleState>& ego_terminal) {
  TerminalLayout layout{scenario.cooperator_count(), !ego_terminal.has_value()};
  Eigen::VectorXd a(layout.num_vars());
  Eigen::VectorXd b(layout.num_vars());
  for (int i = 1; i <= layout.m; ++i) {
    const auto& init = scenario.cooperators[static_cast<std::size_t>(i - 1)];
    const auto ca = predict_uncontrolled(init, t_f);
    const auto cb = tracking_endpoint(init, settings.v_d, t_f, scenario.limits);
    a[layout.x(i)] = ca.position;
    a[layout.v(i)] = ca.speed;
    b[layout.x(i)] = cb.position;
    b[layout.v(i)] = cb.speed;
  }
  if (layout.ego_free) {
    const auto ca = predict_uncontrolled(scenario.ego, t_f);
    const auto cb = tracking_endpoint(scenario.ego, settings.v_d, t_f, scenario.limits);
    a[layout.ego_x()] = ca.position;
    a[layout.ego_v()] = ca.speed;
    b[layout.ego_x()] = cb.position;
    b[layout.ego_v()] = cb.speed;
  }
  return {a, b};
}

std::string to_string(CoordinationStatus status) {
  switch (status) {
    case CoordinationStatus::feasible: return "feasible";
    case CoordinationStatus::infeasible: return "infeasible";
    case CoordinationStatus::solver_failure: return "solver_failure";
  }
  return "unknown";
}

CoordinationOutcome solve_problem1(const Scenario& scenario, double t_f,
                                   const VehicleState& ego_terminal,
                                   const DisruptionSettings& settings, const SolverConfig& config) {
  return enumerate_slots(scenario, t_f, ego_terminal, settings, config);
}

CoordinationOutcome solve_unified_at(const Scenario& scenario, double t_f,
                                     const DisruptionSettings& settings,
                                     const SolverConfig& config) {
  return enumerate_slots(scenario, t_f, std::nullopt, settings, config);
}

CoordinationOutcome solve_unified_p2(const Scenario& scenario, const DisruptionSettings& settings,
                                     const SolverConfig& config, const PlanFilter& accept) {
  if (!(config.t_lb > 0.0) || !(config.t_lb <= config.t_max)) {
    throw std::invalid_argument("need 0 < t_lb <= t_max");
  }
  int solves = 0;
  bool failure = false;
  auto f = [&](double t) {
    const auto out = solve_unified_at(scenario, t, settings, config);
    solves += out.inner_solves;
    if (out.status == CoordinationStatus::solver_failure) failure = true;
    if (out.status != CoordinationStatus::feasible) return kInf;
    if (accept && !accept(out.plan)) return kInf;
    return out.plan.objective;
  };
  const auto search = grid_then_golden(f, config.t_lb, config.t_max, config.grid_points,
                                       config.golden_tol, config.golden_iterations);
  if (!std::isfinite(search.f)) {
    CoordinationOutcome out;
    out.status = failure ? CoordinationStatus::solver_failure : CoordinationStatus::infeasible;
    out.inner_solves = solves;
    return out;
  }
  auto out = solve_unified_at(scenario, search.x, settings, config);
  out.inner_solves += solves;
  return out;
}

std::vector<std::string> verify_plan(const Scenario& s, const TerminalPlan& plan,
                                     bool check_ego_u, double tol) {
  std::vector<std::string> issues;
  const int m = s.cooperator_count();
  const double t = plan.t_f;
  if (static_cast<int>(plan.cooperator_terminals.size()) != m) {
    issues.push_back("cooperator count mismatch");
    return issues;
  }
  auto reach = [&](const VehicleState& origin, const VehicleState& end, const std::string& who) {
    if (!contains(end.position, end.speed, t, origin, s.limits, tol)) {
      std::ostringstream os;
      os << "terminal state of " << who << " is not reachable";
      issues.push_back(os.str());
    }
  };
  auto gap = [&](const VehicleState& lead, const VehicleState& follow, const std::string& what) {
    const double slack = lead.position - follow.position - required_gap(s.safety, follow.speed);
    if (slack < -tol) {
      std::ostringstream os;
      os << "gap " << what << " short by " << -slack << " m";
      issues.push_back(os.str());
    }
  };
  for (int i = 1; i <= m; ++i) {
    reach(s.cooperators[static_cast<std::size_t>(i - 1)],
          plan.cooperator_terminals[static_cast<std::size_t>(i - 1)], std::to_string(i));
  }
  reach(s.ego, plan.ego_terminal, "C");

  // Fast-lane order after the merge: F, 1..slot, C, slot+1..m, B.
  std::vector<std::pair<VehicleState, std::string>> lane;
  if (s.front) lane.emplace_back(predict_uncontrolled(*s.front, t), "F");
  for (int i = 1; i <= m; ++i) {
    if (i == plan.slot + 1) lane.emplace_back(plan.ego_terminal, "C");
    lane.emplace_back(plan.cooperator_terminals[static_cast<std::size_t>(i - 1)], std::to_string(i));
  }
  if (plan.slot == m) lane.emplace_back(plan.ego_terminal, "C");
  if (s.back) lane.emplace_back(predict_uncontrolled(*s.back, t), "B");
  for (std::size_t j = 0; j + 1 < lane.size(); ++j) {
    gap(lane[j].first, lane[j + 1].first, lane[j].second + "-" + lane[j + 1].second);
  }
  if (check_ego_u) gap(predict_uncontrolled(s.uncontrolled, t), plan.ego_terminal, "U-C");
  return issues;
}

}  // namespace lanechange
