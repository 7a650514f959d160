#include "lanechange/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lanechange/scalar_search.hpp"

namespace lanechange {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

ConvexConstraint speed_band_row(int n, int vi, double bound, bool upper, double range,
                                const std::string& name) {
  SeparableQuadratic g = SeparableQuadratic::zero(n);
  if (upper) {
    g.linear[vi] = 1.0 / range;
    g.constant = -bound / range;
    return {"band_max:" + name, std::move(g)};
  }
  g.linear[vi] = -1.0 / range;
  g.constant = bound / range;
  return {"band_min:" + name, std::move(g)};
}

// Cooperator i at constant speed, or F / B when i falls off the platoon.
std::optional<RowVehicle> cruising_neighbour(const Scenario& s, int i, double t) {
  const int m = s.cooperator_count();
  if (i >= 1 && i <= m) {
    return RowVehicle::constant(predict_uncontrolled(s.cooperators[static_cast<std::size_t>(i - 1)], t),
                                std::to_string(i));
  }
  if (i < 1 && s.front) return RowVehicle::constant(predict_uncontrolled(*s.front, t), "F");
  if (i > m && s.back) return RowVehicle::constant(predict_uncontrolled(*s.back, t), "B");
  return std::nullopt;
}

}  // namespace

std::string to_string(PairVariant v) {
  return v == PairVariant::position_only ? "position_only" : "full_disruption";
}

std::string to_string(TerminalSpeedMode m) {
  return m == TerminalSpeedMode::hard_constraint ? "hard_constraint" : "terminal_cost";
}

IdmOutput idm_acceleration(const VehicleState& self, const std::optional<VehicleState>& leader,
                           const IdmParams& p, const ActuationLimits& limits) {
  const double v = std::max(0.0, self.speed);
  double a = p.max_accel * (1.0 - std::pow(v / p.desired_speed, p.accel_exponent));
  if (leader) {
    const double s = leader->position - self.position;
    if (!(s > 0.0)) return {limits.u_min, true};
    const double dv = v - leader->speed;
    const double s_star =
        p.min_gap + std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel)));
    a -= p.max_accel * (s_star / s) * (s_star / s);
  }
  return {std::clamp(a, limits.u_min, limits.u_max), false};
}

Trajectory simulate_idm_follower(const VehicleState& initial, const Trajectory& leader,
                                 const IdmParams& p, const ActuationLimits& limits,
                                 int* emergencies) {
  const int n = leader.intervals();
  const double dt = leader.dt;
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(n));
  VehicleState s = initial;
  int flagged = 0;
  for (int k = 0; k < n; ++k) {
    const auto out = idm_acceleration(s, leader.at(k), p, limits);
    if (out.emergency) ++flagged;
    const double a = std::clamp(out.acceleration, std::max(limits.u_min, (limits.v_min - s.speed) / dt),
                                std::min(limits.u_max, (limits.v_max - s.speed) / dt));
    u.push_back(a);
    s.position += s.speed * dt + 0.5 * a * dt * dt;
    s.speed += a * dt;
  }
  if (emergencies) *emergencies = flagged;
  return propagate(initial, u, dt);
}

void BaselineConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(d_th > 0.0)) throw std::invalid_argument("d_th must be positive");
  if (!(lambda > 1.0)) throw std::invalid_argument("lambda must exceed 1");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (!(speed_tolerance > 0.0)) throw std::invalid_argument("speed_tolerance must be positive");
  if (!(terminal_cost_weight >= 0.0)) throw std::invalid_argument("terminal_cost_weight must be non-negative");
  if (!(idm.desired_speed > 0.0 && idm.max_accel > 0.0 && idm.comfortable_decel > 0.0 &&
        idm.accel_exponent > 0.0 && idm.min_gap > 0.0 && idm.time_headway > 0.0)) {
    throw std::invalid_argument("IDM parameters must be positive");
  }
}

BaselineConfig BaselineConfig::position_only() {
  BaselineConfig c;
  c.variant = PairVariant::position_only;
  c.terminal_speed_mode = TerminalSpeedMode::hard_constraint;
  return c;
}

BaselineConfig BaselineConfig::full_disruption() {
  BaselineConfig c;
  c.variant = PairVariant::full_disruption;
  c.terminal_speed_mode = TerminalSpeedMode::terminal_cost;
  return c;
}

std::optional<EgoPlan> step1_ego_plan_at(const Scenario& s, double t_f, double v_d,
                                         const BaselineConfig& cfg, const SolverConfig& solver,
                                         const PlannerConfig& planner) {
  const int n = planner.intervals;
  Transcription tr(s.ego, t_f, n);
  tr.add_limits(s.limits);
  const Trajectory u_traj = constant_speed_trajectory(s.uncontrolled, tr.dt(), n);
  tr.add_partner(partner_from(u_traj, true, false, "U"), s.safety);

  const double energy_scale = 0.5 * s.limits.u_max * s.limits.u_max * solver.t_max;
  const double w = (1.0 - cfg.alpha) / energy_scale;
  Eigen::MatrixXd h = w * tr.dt() * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  double constant = cfg.alpha * t_f / solver.t_max;
  if (cfg.terminal_speed_mode == TerminalSpeedMode::hard_constraint) {
    tr.add_terminal_speed_band(v_d - cfg.speed_tolerance, v_d + cfg.speed_tolerance);
  } else {
    // kappa (v0 + b.u - v_d)^2
    const Eigen::VectorXd b = tr.speed_row(n).transpose();
    const double r = s.ego.speed - v_d;
    h += 2.0 * cfg.terminal_cost_weight * b * b.transpose();
    c += 2.0 * cfg.terminal_cost_weight * r * b;
    constant += cfg.terminal_cost_weight * r * r;
  }
  const InequalityQp qp = tr.qp(std::move(h), std::move(c));
  const QpSolution sol = solve_dual_active_set(qp);
  if (sol.status != QpStatus::optimal) return std::nullopt;
  EgoPlan plan;
  plan.t_f = t_f;
  plan.objective = constant + sol.objective;
  plan.trajectory = trajectory_from(tr, sol.z, s.limits);
  plan.terminal = plan.trajectory.terminal();
  return plan;
}

std::optional<EgoPlan> step1_ego_plan(const Scenario& s, double v_d, const BaselineConfig& cfg,
                                      const SolverConfig& solver, const PlannerConfig& planner) {
  auto f = [&](double t) {
    const auto p = step1_ego_plan_at(s, t, v_d, cfg, solver, planner);
    return p ? p->objective : kInf;
  };
  const auto r = grid_then_golden(f, solver.t_lb, solver.t_max, solver.grid_points,
                                  solver.golden_tol, solver.golden_iterations);
  if (!std::isfinite(r.f)) return std::nullopt;
  return step1_ego_plan_at(s, r.x, v_d, cfg, solver, planner);
}

std::optional<PairSelection> step2_select_pair(const Scenario& s, double t_f,
                                               const VehicleState& ego_terminal,
                                               const DisruptionSettings& settings,
                                               PairVariant variant, double speed_tolerance,
                                               const ConvexSolverOptions& options) {
  const int m = s.cooperator_count();
  if (m < 1) throw std::invalid_argument("pair selection needs at least one cooperator");
  const RowVehicle ego = RowVehicle::constant(ego_terminal, "C");
  const double range = s.limits.v_max - s.limits.v_min;
  std::optional<PairSelection> best;
  for (int k = 0; k <= m; ++k) {
    std::vector<int> members;
    if (k >= 1) members.push_back(k);
    if (k + 1 <= m) members.push_back(k + 1);
    const int n = 2 * static_cast<int>(members.size());
    ConvexProblem p;
    p.num_vars = n;
    p.objective = SeparableQuadratic::zero(n);
    Eigen::VectorXd start_a(n), start_b(n);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const int i = members[j];
      const auto xi = static_cast<int>(2 * j);
      const auto& init = s.cooperators[static_cast<std::size_t>(i - 1)];
      const RowVehicle me = RowVehicle::variable(xi, xi + 1, std::to_string(i));
      add_vehicle_rows(p.constraints, n, me, init, t_f, s.limits);
      DisruptionWeights w = weights_for(settings, init, s.limits);
      if (variant == PairVariant::position_only) {
        w.gamma_v = 0.0;
        p.constraints.push_back(speed_band_row(n, xi + 1, settings.v_d + speed_tolerance, true, range, me.name));
        p.constraints.push_back(speed_band_row(n, xi + 1, settings.v_d - speed_tolerance, false, range, me.name));
      }
      add_disruption_term(p.objective, xi, xi + 1, init, t_f, w);
      if (i == k) {
        // Ahead of the ego, behind cooperator k - 1 (or F).
        if (auto lead = cruising_neighbour(s, k - 1, t_f)) p.constraints.push_back(make_gap_row(n, *lead, me, s.safety, "gap"));
        p.constraints.push_back(make_gap_row(n, me, ego, s.safety, "order"));
      } else {
        p.constraints.push_back(make_gap_row(n, ego, me, s.safety, "order"));
        if (auto tail = cruising_neighbour(s, k + 2, t_f)) p.constraints.push_back(make_gap_row(n, me, *tail, s.safety, "gap"));
      }
      const auto ca = predict_uncontrolled(init, t_f);
      const auto cb = tracking_endpoint(init, settings.v_d, t_f, s.limits);
      start_a[xi] = ca.position;
      start_a[xi + 1] = ca.speed;
      start_b[xi] = cb.position;
      start_b[xi + 1] = cb.speed;
    }
    // End slots only see F or B on the far side.
    if (k == 0) {
      if (auto lead = cruising_neighbour(s, 0, t_f)) p.constraints.push_back(make_gap_row(n, *lead, ego, s.safety, "gap"));
    }
    if (k == m) {
      if (auto tail = cruising_neighbour(s, m + 1, t_f)) p.constraints.push_back(make_gap_row(n, ego, *tail, s.safety, "gap"));
    }
    const std::vector<Eigen::VectorXd> starts{start_a, start_b};
    const InnerResult r = inner_solve(p, starts, options);
    if (r.status != ConvexStatus::optimal) continue;
    const double tol = 1e-12 * std::max(1.0, best ? std::abs(best->objective) : 0.0);
    if (best && !(r.objective < best->objective - tol)) continue;
    PairSelection sel;
    sel.slot = k;
    sel.members = members;
    sel.objective = r.objective;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const VehicleState end{r.z[static_cast<Eigen::Index>(2 * j)], r.z[static_cast<Eigen::Index>(2 * j + 1)]};
      sel.terminals.push_back(end);
      const auto& init = s.cooperators[static_cast<std::size_t>(members[j] - 1)];
      sel.disruption += total_disruption(init, end, t_f, weights_for(settings, init, s.limits));
    }
    best = std::move(sel);
  }
  return best;
}

std::vector<VehicleTrajectory> assemble_baseline(const Scenario& s, const EgoPlan& ego,
                                                 const PairSelection& pair, const IdmParams& idm,
                                                 const PlannerConfig& planner) {
  const int m = s.cooperator_count();
  const int n = planner.intervals;
  const double t_f = ego.t_f;
  const double dt = t_f / n;
  std::vector<VehicleTrajectory> lane;
  lane.reserve(static_cast<std::size_t>(m) + 1);
  std::optional<Trajectory> front;
  std::optional<Trajectory> back;
  if (s.front) front = constant_speed_trajectory(*s.front, dt, n);
  if (s.back) back = constant_speed_trajectory(*s.back, dt, n);

  auto target_of = [&](int i) -> std::optional<VehicleState> {
    for (std::size_t j = 0; j < pair.members.size(); ++j) {
      if (pair.members[j] == i) return pair.terminals[j];
    }
    return std::nullopt;
  };
  auto plan_member = [&](int i, const VehicleState& target, std::vector<HeadwayPartner> partners) {
    const VehicleRef ref{VehicleRole::cooperator, i};
    if (i == m && back) partners.push_back(partner_from(*back, false, false, "B"));
    try {
      return VehicleTrajectory{ref, "planned", target,
                               plan_min_energy(s.cooperators[static_cast<std::size_t>(i - 1)], target, t_f,
                                               partners, s.limits, s.safety, planner)};
    } catch (const PlanningError& e) {
      throw PlanningError(to_string(ref) + ": " + e.what(), e.constraint());
    }
  };

  std::optional<Trajectory> leader = front;
  std::string leader_id = "F";
  for (int i = 1; i <= pair.slot; ++i) {
    const auto& init = s.cooperators[static_cast<std::size_t>(i - 1)];
    if (auto target = target_of(i)) {
      std::vector<HeadwayPartner> partners;
      if (leader) partners.push_back(partner_from(*leader, true, false, leader_id));
      partners.push_back(partner_from(ego.trajectory, false, true, "C"));
      lane.push_back(plan_member(i, *target, std::move(partners)));
    } else {
      lane.push_back({{VehicleRole::cooperator, i}, "constant_speed", std::nullopt,
                      constant_speed_trajectory(init, dt, n)});
    }
    leader = lane.back().trajectory;
    leader_id = std::to_string(i);
  }
  lane.push_back({{VehicleRole::ego, 0}, "planned", ego.terminal, ego.trajectory});
  for (int i = pair.slot + 1; i <= m; ++i) {
    const auto& init = s.cooperators[static_cast<std::size_t>(i - 1)];
    if (auto target = target_of(i)) {
      std::vector<HeadwayPartner> partners;
      if (leader) partners.push_back(partner_from(*leader, true, false, leader_id));
      partners.push_back(partner_from(ego.trajectory, true, true, "C"));
      lane.push_back(plan_member(i, *target, std::move(partners)));
    } else if (leader) {
      lane.push_back({{VehicleRole::cooperator, i}, "idm", std::nullopt,
                      simulate_idm_follower(init, *leader, idm, s.limits)});
    } else {
      lane.push_back({{VehicleRole::cooperator, i}, "idm", std::nullopt,
                      simulate_idm_follower(init, constant_speed_trajectory({1e9, idm.desired_speed}, dt, n), idm,
                                            s.limits)});
    }
    leader = lane.back().trajectory;
    leader_id = std::to_string(i);
  }
  return lane;
}

IterativeResult run_iterative(const Scenario& s, const DisruptionSettings& settings,
                              const BaselineConfig& cfg, IterativeMode mode,
                              const SolverConfig& solver, const PlannerConfig& planner) {
  cfg.validate();
  IterativeResult res;
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<EgoPlan> ego = step1_ego_plan(s, settings.v_d, cfg, solver, planner);
  double step1_seconds = elapsed(t0);
  if (!ego) {
    res.iterations.push_back({kInf, step1_seconds, false, "ego problem infeasible"});
    res.n_iter = 1;
    res.failure = "ego problem infeasible on [t_lb, t_max]";
    return res;
  }
  res.t_f_star = ego->t_f;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const double t = res.t_f_star * std::pow(cfg.lambda, k);
    if (t > solver.t_max + 1e-12) {
      res.failure = "relaxed terminal time exceeds t_max";
      break;
    }
    IterationRecord rec;
    rec.t_f = t;
    const auto start = std::chrono::steady_clock::now();
    if (k > 0) ego = step1_ego_plan_at(s, t, settings.v_d, cfg, solver, planner);
    bool ok = false;
    std::optional<PairSelection> pair;
    std::optional<CoordinationOutcome> coord;
    if (!ego) {
      rec.note = "ego problem infeasible";
    } else if (mode == IterativeMode::baseline) {
      pair = step2_select_pair(s, t, ego->terminal, settings, cfg.variant, cfg.speed_tolerance, solver.inner);
      if (!pair) {
        rec.note = "no feasible pair";
      } else if (!(pair->objective < cfg.d_th)) {
        rec.note = "pair disruption above threshold";
      } else {
        ok = true;
      }
    } else {
      coord = solve_problem1(s, t, ego->terminal, settings, solver);
      if (coord->status != CoordinationStatus::feasible) {
        rec.note = "coordination " + to_string(coord->status);
      } else if (!(coord->plan.report.global < cfg.d_th)) {
        rec.note = "global disruption above threshold";
      } else {
        ok = true;
      }
    }
    rec.seconds = elapsed(start) + (k == 0 ? step1_seconds : 0.0);

    if (ok) {
      try {
        if (mode == IterativeMode::baseline) {
          res.trajectories = assemble_baseline(s, *ego, *pair, cfg.idm, planner);
          res.plan.t_f = t;
          res.plan.slot = pair->slot;
          res.plan.ego_terminal = ego->terminal;
          for (const auto& vt : res.trajectories) {
            if (vt.ref.role == VehicleRole::cooperator) res.plan.cooperator_terminals.push_back(vt.trajectory.terminal());
          }
          res.pair = pair;
        } else {
          res.plan = coord->plan;
          res.trajectories = plan_all(coord->plan, s, planner);
        }
      } catch (const PlanningError& e) {
        ok = false;
        rec.note = std::string("trajectory planning failed: ") + e.what();
      }
    }
    rec.accepted = ok;
    res.iterations.push_back(rec);
    if (ok) {
      res.feasible = true;
      res.n_iter = k + 1;
      return res;
    }
  }
  res.n_iter = static_cast<int>(res.iterations.size());
  if (res.failure.empty()) res.failure = "iteration limit reached";
  return res;
}

}  // namespace lanechange
