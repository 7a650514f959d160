#include "lanechange/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "lanechange/terminal_coordination.hpp"

namespace lanechange {

Trajectory propagate(const VehicleState& initial, std::span<const double> controls, double dt) {
  Trajectory t;
  t.dt = dt;
  t.controls.assign(controls.begin(), controls.end());
  t.positions.reserve(controls.size() + 1);
  t.speeds.reserve(controls.size() + 1);
  double x = initial.position;
  double v = initial.speed;
  t.positions.push_back(x);
  t.speeds.push_back(v);
  for (double u : controls) {
    x += v * dt + 0.5 * u * dt * dt;
    v += u * dt;
    t.positions.push_back(x);
    t.speeds.push_back(v);
  }
  return t;
}

Trajectory constant_speed_trajectory(const VehicleState& initial, double dt, int intervals) {
  Trajectory t;
  t.dt = dt;
  t.controls.assign(static_cast<std::size_t>(intervals), 0.0);
  for (int k = 0; k <= intervals; ++k) {
    t.positions.push_back(initial.position + initial.speed * dt * k);
    t.speeds.push_back(initial.speed);
  }
  return t;
}

double energy(const Trajectory& t) {
  double e = 0.0;
  for (double u : t.controls) e += 0.5 * u * u * t.dt;
  return e;
}

HeadwayPartner partner_from(const Trajectory& t, bool partner_is_leader, bool terminal_only,
                            std::string label) {
  return {t.positions, t.speeds, partner_is_leader, terminal_only, std::move(label)};
}

Transcription::Transcription(const VehicleState& initial, double t_f, int intervals)
    : initial_(initial), n_(intervals), dt_(t_f / intervals) {}

Eigen::RowVectorXd Transcription::position_row(int k) const {
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n_);
  for (int j = 0; j < k; ++j) r[j] = dt_ * dt_ * (k - j - 0.5);
  return r;
}

Eigen::RowVectorXd Transcription::speed_row(int k) const {
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n_);
  r.head(k).setConstant(dt_);
  return r;
}

double Transcription::position_offset(int k) const {
  return initial_.position + initial_.speed * dt_ * k;
}

void Transcription::add(Eigen::RowVectorXd row, double bound, std::string label) {
  rows_.push_back(std::move(row));
  rhs_.push_back(bound);
  labels_.push_back(std::move(label));
}

void Transcription::add_limits(const ActuationLimits& limits) {
  const double v0 = initial_.speed;
  for (int j = 0; j < n_; ++j) {
    Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n_);
    e[j] = 1.0;
    add(e, limits.u_min, "u_min@" + std::to_string(j));
    add(-e, -limits.u_max, "u_max@" + std::to_string(j));
  }
  for (int k = 1; k <= n_; ++k) {
    const Eigen::RowVectorXd vr = speed_row(k);
    add(vr, limits.v_min - v0, "v_min@" + std::to_string(k));
    add(-vr, v0 - limits.v_max, "v_max@" + std::to_string(k));
  }
}

void Transcription::add_partner(const HeadwayPartner& p, const SafetyParams& safety) {
  if (static_cast<int>(p.positions.size()) != n_ + 1 || static_cast<int>(p.speeds.size()) != n_ + 1) {
    throw std::invalid_argument("partner " + p.label + " has the wrong node count");
  }
  const double v0 = initial_.speed;
  for (int k = p.terminal_only ? n_ : 1; k <= n_; ++k) {
    const double drift = position_offset(k);
    const auto kk = static_cast<std::size_t>(k);
    const std::string label = "headway:" + p.label + "@" + std::to_string(k);
    if (p.partner_is_leader) {
      // x_P - x_k - phi v_k >= eps
      add(-(position_row(k) + safety.phi * speed_row(k)),
          safety.epsilon - p.positions[kk] + drift + safety.phi * v0, label);
    } else {
      // x_k - x_P >= phi v_P + eps
      add(position_row(k), safety.epsilon + safety.phi * p.speeds[kk] + p.positions[kk] - drift, label);
    }
  }
}

void Transcription::add_terminal_speed_band(double lo, double hi) {
  add(speed_row(n_), lo - initial_.speed, "terminal_v_low");
  add(-speed_row(n_), -(hi - initial_.speed), "terminal_v_high");
}

void Transcription::add_terminal_position_band(double lo, double hi) {
  const double drift = position_offset(n_);
  add(position_row(n_), lo - drift, "terminal_x_low");
  add(-position_row(n_), -(hi - drift), "terminal_x_high");
}

InequalityQp Transcription::qp(Eigen::MatrixXd hessian, Eigen::VectorXd linear) const {
  InequalityQp q;
  q.hessian = std::move(hessian);
  q.linear = std::move(linear);
  q.a.resize(static_cast<Eigen::Index>(rows_.size()), n_);
  q.b.resize(static_cast<Eigen::Index>(rows_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    q.a.row(static_cast<Eigen::Index>(i)) = rows_[i];
    q.b[static_cast<Eigen::Index>(i)] = rhs_[i];
  }
  return q;
}

PlanDetail plan_min_energy_detail(const VehicleState& initial, const VehicleState& target,
                                  double t_f, std::span<const HeadwayPartner> partners,
                                  const ActuationLimits& limits, const SafetyParams& safety,
                                  const PlannerConfig& config) {
  const int n = config.intervals;
  if (n < 10 || !(t_f > 0.0)) throw std::invalid_argument("plan_min_energy: need t_f > 0 and intervals >= 10");
  if (!(config.delta_x > 0.0) || !(config.delta_v > 0.0)) {
    throw std::invalid_argument("plan_min_energy: terminal tolerances must be positive");
  }
  Transcription tr(initial, t_f, n);
  tr.add_limits(limits);
  for (const auto& p : partners) tr.add_partner(p, safety);
  const double rx = std::sqrt(config.delta_x);
  const double rv = std::sqrt(config.delta_v);
  tr.add_terminal_position_band(target.position - rx, target.position + rx);
  tr.add_terminal_speed_band(target.speed - rv, target.speed + rv);

  PlanDetail d;
  d.qp = tr.qp(tr.dt() * Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
  d.row_labels = tr.labels();
  d.solution = solve_dual_active_set(d.qp);
  if (d.solution.status == QpStatus::infeasible) {
    const auto& label = d.row_labels[static_cast<std::size_t>(d.solution.blocking_row)];
    throw PlanningError("trajectory program infeasible at " + label, label);
  }
  if (d.solution.status != QpStatus::optimal) {
    throw PlanningError("trajectory program hit the iteration limit", "");
  }
  d.kkt = kkt_residuals(d.qp, d.solution);
  d.trajectory = trajectory_from(tr, d.solution.z, limits);
  return d;
}

Trajectory trajectory_from(const Transcription& tr, const Eigen::VectorXd& z,
                           const ActuationLimits& limits) {
  std::vector<double> u(z.data(), z.data() + z.size());
  // Clip round-off so the stored controls respect the box exactly.
  for (double& x : u) x = std::clamp(x, limits.u_min, limits.u_max);
  return propagate(tr.initial(), u, tr.dt());
}

Trajectory plan_min_energy(const VehicleState& initial, const VehicleState& target, double t_f,
                           std::span<const HeadwayPartner> partners, const ActuationLimits& limits,
                           const SafetyParams& safety, const PlannerConfig& config) {
  return plan_min_energy_detail(initial, target, t_f, partners, limits, safety, config).trajectory;
}

std::string vehicle_id(const VehicleRef& ref) {
  switch (ref.role) {
    case VehicleRole::ego: return "C";
    case VehicleRole::uncontrolled: return "U";
    case VehicleRole::front: return "F";
    case VehicleRole::back: return "B";
    case VehicleRole::cooperator: return std::to_string(ref.index);
  }
  return "?";
}

std::vector<VehicleTrajectory> plan_all(const TerminalPlan& plan, const Scenario& s,
                                        const PlannerConfig& config) {
  const int m = s.cooperator_count();
  const int n = config.intervals;
  const double dt = plan.t_f / n;
  std::optional<Trajectory> front;
  std::optional<Trajectory> back;
  if (s.front) front = constant_speed_trajectory(*s.front, dt, n);
  if (s.back) back = constant_speed_trajectory(*s.back, dt, n);
  const Trajectory u_traj = constant_speed_trajectory(s.uncontrolled, dt, n);

  std::vector<VehicleTrajectory> out;
  out.reserve(static_cast<std::size_t>(m) + 1);
  const Trajectory* lane_leader = front ? &*front : nullptr;  // last fast-lane vehicle planned
  std::string lane_leader_id = front ? "F" : "";

  auto plan_one = [&](const VehicleRef& ref, const VehicleState& init, const VehicleState& target,
                      const std::vector<HeadwayPartner>& partners) {
    try {
      VehicleTrajectory vt{ref, "planned", target,
                           plan_min_energy(init, target, plan.t_f, partners, s.limits, s.safety, config)};
      out.push_back(std::move(vt));
    } catch (const PlanningError& e) {
      throw PlanningError(to_string(ref) + ": " + e.what(), e.constraint());
    }
  };

  auto plan_coop = [&](int i, bool behind_ego) {
    std::vector<HeadwayPartner> partners;
    if (lane_leader) partners.push_back(partner_from(*lane_leader, true, false, lane_leader_id));
    if (behind_ego) partners.push_back(partner_from(out.back().trajectory, true, true, "C"));
    if (i == m && back) partners.push_back(partner_from(*back, false, false, "B"));
    const auto idx = static_cast<std::size_t>(i - 1);
    plan_one({VehicleRole::cooperator, i}, s.cooperators[idx], plan.cooperator_terminals[idx], partners);
    lane_leader = &out.back().trajectory;
    lane_leader_id = std::to_string(i);
  };

  for (int i = 1; i <= plan.slot; ++i) plan_coop(i, false);
  // out may reallocate below, so keep a copy of the ego's fast-lane leader.
  std::optional<Trajectory> ego_leader;
  if (lane_leader) ego_leader = *lane_leader;
  {
    std::vector<HeadwayPartner> partners;
    partners.push_back(partner_from(u_traj, true, false, "U"));
    if (ego_leader) partners.push_back(partner_from(*ego_leader, true, true, lane_leader_id));
    if (plan.slot == m && back) partners.push_back(partner_from(*back, false, true, "B"));
    plan_one({VehicleRole::ego, 0}, s.ego, plan.ego_terminal, partners);
  }
  std::optional<Trajectory> held = ego_leader;
  lane_leader = held ? &*held : nullptr;
  for (int i = plan.slot + 1; i <= m; ++i) {
    plan_coop(i, i == plan.slot + 1);
  }
  return out;
}

bool plannable(const TerminalPlan& plan, const Scenario& scenario, const PlannerConfig& config) {
  try {
    plan_all(plan, scenario, config);
    return true;
  } catch (const PlanningError&) {
    return false;
  }
}

bool SafetyAudit::passes(double tol, double delta_x, double delta_v) const {
  return min_headway_slack >= -tol && max_terminal_dx2 <= delta_x + tol &&
         max_terminal_dv2 <= delta_v + tol && max_control_excess <= tol &&
         max_speed_excess <= tol && max_dynamics_residual <= tol;
}

SafetyAudit audit_trajectories(const Scenario& s, std::span<const VehicleTrajectory> lane) {
  SafetyAudit a;
  if (lane.empty()) return a;
  const Trajectory& ref = lane.front().trajectory;
  const int n = ref.intervals();
  const double dt = ref.dt;

  auto pair = [&](const Trajectory& lead, const Trajectory& follow, bool terminal_only,
                  const std::string& name) {
    for (int k = terminal_only ? n : 0; k <= n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double slack =
          lead.positions[kk] - follow.positions[kk] - required_gap(s.safety, follow.speeds[kk]);
      if (slack < a.min_headway_slack) {
        a.min_headway_slack = slack;
        a.worst_pair = name + "@" + std::to_string(k);
      }
    }
  };

  std::optional<Trajectory> front;
  std::optional<Trajectory> back;
  if (s.front) front = constant_speed_trajectory(*s.front, dt, n);
  if (s.back) back = constant_speed_trajectory(*s.back, dt, n);

  // Same-lane neighbours over the whole horizon; the ego joins the fast lane at t_f.
  const Trajectory* prev = front ? &*front : nullptr;
  std::string prev_id = "F";
  const VehicleTrajectory* ego = nullptr;
  const Trajectory* ego_leader = nullptr;
  std::string ego_leader_id;
  for (const auto& vt : lane) {
    if (vt.ref.role == VehicleRole::ego) {
      ego = &vt;
      ego_leader = prev;
      ego_leader_id = prev_id;
      continue;
    }
    if (prev) pair(*prev, vt.trajectory, false, prev_id + "-" + vehicle_id(vt.ref));
    prev = &vt.trajectory;
    prev_id = vehicle_id(vt.ref);
  }
  if (back && prev) pair(*prev, *back, false, prev_id + "-B");

  if (ego) {
    const Trajectory u = constant_speed_trajectory(s.uncontrolled, dt, n);
    pair(u, ego->trajectory, false, "U-C");
    if (ego_leader) pair(*ego_leader, ego->trajectory, true, ego_leader_id + "-C");
    // Follower of the ego: first vehicle after it in the lane, or B.
    bool seen = false;
    const Trajectory* follower = nullptr;
    std::string follower_id;
    for (const auto& vt : lane) {
      if (seen) {
        follower = &vt.trajectory;
        follower_id = vehicle_id(vt.ref);
        break;
      }
      if (&vt == ego) seen = true;
    }
    if (!follower && back) {
      follower = &*back;
      follower_id = "B";
    }
    if (follower) pair(ego->trajectory, *follower, true, "C-" + follower_id);
  }

  for (const auto& vt : lane) {
    const auto& t = vt.trajectory;
    for (int k = 0; k < t.intervals(); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double u = t.controls[kk];
      a.max_control_excess = std::max({a.max_control_excess, s.limits.u_min - u, u - s.limits.u_max});
      const double xn = t.positions[kk] + t.speeds[kk] * t.dt + 0.5 * u * t.dt * t.dt;
      const double vn = t.speeds[kk] + u * t.dt;
      a.max_dynamics_residual = std::max({a.max_dynamics_residual, std::abs(xn - t.positions[kk + 1]),
                                          std::abs(vn - t.speeds[kk + 1])});
    }
    for (double v : t.speeds) {
      a.max_speed_excess = std::max({a.max_speed_excess, s.limits.v_min - v, v - s.limits.v_max});
    }
    if (vt.target) {
      const double dx = t.positions.back() - vt.target->position;
      const double dv = t.speeds.back() - vt.target->speed;
      a.max_terminal_dx2 = std::max(a.max_terminal_dx2, dx * dx);
      a.max_terminal_dv2 = std::max(a.max_terminal_dv2, dv * dv);
    }
  }
  return a;
}

void write_trajectories_csv(std::ostream& os, std::span<const VehicleTrajectory> lane) {
  os << "t,x,v,u,vehicle_id,role,source\n";
  os.precision(17);
  for (const auto& vt : lane) {
    const auto& t = vt.trajectory;
    for (std::size_t k = 0; k < t.positions.size(); ++k) {
      os << t.dt * static_cast<double>(k) << ',' << t.positions[k] << ',' << t.speeds[k] << ',';
      if (k < t.controls.size()) os << t.controls[k];
      os << ',' << vehicle_id(vt.ref) << ',' << to_string(vt.ref.role) << ',' << vt.source << '\n';
    }
  }
}

namespace {

VehicleRef parse_ref(const std::string& id, const std::string& role) {
  if (role == "ego") return {VehicleRole::ego, 0};
  if (role == "uncontrolled") return {VehicleRole::uncontrolled, 0};
  if (role == "front") return {VehicleRole::front, 0};
  if (role == "back") return {VehicleRole::back, 0};
  if (role == "cooperator") return {VehicleRole::cooperator, std::stoi(id)};
  throw std::runtime_error("unknown role '" + role + "'");
}

}  // namespace

std::vector<VehicleTrajectory> read_trajectories_csv(std::istream& is) {
  std::vector<VehicleTrajectory> out;
  std::string line;
  if (!std::getline(is, line)) return out;
  int line_no = 1;
  std::string current;
  std::vector<double> times;
  auto close = [&]() {
    if (out.empty()) return;
    auto& t = out.back().trajectory;
    if (times.size() >= 2) t.dt = times[1] - times[0];
    times.clear();
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() == 6) f.emplace_back();  // trailing empty source
    if (f.size() != 7) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected 7 columns");
    }
    const std::string key = f[4] + "/" + f[5];
    if (key != current) {
      close();
      current = key;
      out.push_back({parse_ref(f[4], f[5]), f[6], std::nullopt, {}});
    }
    auto& t = out.back().trajectory;
    times.push_back(std::stod(f[0]));
    t.positions.push_back(std::stod(f[1]));
    t.speeds.push_back(std::stod(f[2]));
    if (!f[3].empty()) t.controls.push_back(std::stod(f[3]));
  }
  close();
  return out;
}

}  // namespace lanechange
