#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lanechange/active_set_qp.hpp"
#include "lanechange/scenario.hpp"

namespace lanechange {

struct TerminalPlan;

/// Uniformly sampled trajectory starting at t = 0. `controls` holds one value per interval
/// and is therefore one shorter than `positions` and `speeds`.
struct Trajectory {
  double dt = 0.0;
  std::vector<double> positions;
  std::vector<double> speeds;
  std::vector<double> controls;

  int intervals() const { return static_cast<int>(controls.size()); }
  double horizon() const { return dt * intervals(); }
  VehicleState at(int k) const {
    return {positions[static_cast<std::size_t>(k)], speeds[static_cast<std::size_t>(k)]};
  }
  VehicleState terminal() const { return {positions.back(), speeds.back()}; }
};

/// Exact zero-order-hold propagation of a control sequence.
Trajectory propagate(const VehicleState& initial, std::span<const double> controls, double dt);

/// Constant-speed trajectory with `intervals` steps of length dt.
Trajectory constant_speed_trajectory(const VehicleState& initial, double dt, int intervals);

/// Sum of 0.5 u^2 dt.
double energy(const Trajectory& t);

struct PlannerConfig {
  int intervals = 100;
  double delta_x = 0.1;  // m^2, terminal position tolerance
  double delta_v = 0.1;  // m^2/s^2, terminal speed tolerance
  double stationarity_tol = 1e-6;
};

/// Another vehicle the planned one must keep the headway to. When `partner_is_leader` the
/// partner drives ahead; otherwise it follows. Terminal-only partners are checked at the last
/// node only.
struct HeadwayPartner {
  std::vector<double> positions;
  std::vector<double> speeds;
  bool partner_is_leader = true;
  bool terminal_only = false;
  std::string label;
};

HeadwayPartner partner_from(const Trajectory& t, bool partner_is_leader, bool terminal_only,
                            std::string label);

class PlanningError : public std::runtime_error {
 public:
  PlanningError(const std::string& what, std::string constraint)
      : std::runtime_error(what), constraint_(std::move(constraint)) {}
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

/// Condensed direct transcription over a uniform grid: with exact zero-order hold, position
/// and speed at node k are affine in the control vector u. Rows are collected as a . u >= b.
class Transcription {
 public:
  Transcription(const VehicleState& initial, double t_f, int intervals);

  int intervals() const { return n_; }
  double dt() const { return dt_; }
  const VehicleState& initial() const { return initial_; }

  /// x_k = position_offset(k) + position_row(k) . u
  Eigen::RowVectorXd position_row(int k) const;
  double position_offset(int k) const;
  /// v_k = initial speed + speed_row(k) . u
  Eigen::RowVectorXd speed_row(int k) const;

  void add(Eigen::RowVectorXd row, double bound, std::string label);
  void add_limits(const ActuationLimits& limits);
  void add_partner(const HeadwayPartner& partner, const SafetyParams& safety);
  void add_terminal_speed_band(double lo, double hi);
  void add_terminal_position_band(double lo, double hi);

  const std::vector<std::string>& labels() const { return labels_; }
  InequalityQp qp(Eigen::MatrixXd hessian, Eigen::VectorXd linear) const;

 private:
  VehicleState initial_;
  int n_;
  double dt_;
  std::vector<Eigen::RowVectorXd> rows_;
  std::vector<double> rhs_;
  std::vector<std::string> labels_;
};

/// Propagates the controls z (clipped to the box) from the transcription's initial state.
Trajectory trajectory_from(const Transcription& tr, const Eigen::VectorXd& z,
                           const ActuationLimits& limits);

struct PlanDetail {
  Trajectory trajectory;
  InequalityQp qp;
  std::vector<std::string> row_labels;
  QpSolution solution;
  KktResiduals kkt;
};

/// Minimum-energy transcription over `config.intervals` steps. The terminal tolerances are
/// enforced as |x_N - x_f| <= sqrt(delta_x) and |v_N - v_f| <= sqrt(delta_v). Throws
/// PlanningError naming the blocking constraint when the program is infeasible.
PlanDetail plan_min_energy_detail(const VehicleState& initial, const VehicleState& target,
                                  double t_f, std::span<const HeadwayPartner> partners,
                                  const ActuationLimits& limits, const SafetyParams& safety,
                                  const PlannerConfig& config);

Trajectory plan_min_energy(const VehicleState& initial, const VehicleState& target, double t_f,
                           std::span<const HeadwayPartner> partners, const ActuationLimits& limits,
                           const SafetyParams& safety, const PlannerConfig& config);

/// Short vehicle id used in files: C, U, F, B or the cooperator index.
std::string vehicle_id(const VehicleRef& ref);

struct VehicleTrajectory {
  VehicleRef ref;
  std::string source;  // planned, constant_speed or idm
  std::optional<VehicleState> target;
  Trajectory trajectory;
};

/// Plans the fast lane front to back with the ego inserted at its slot. The ego keeps the
/// headway to U at every node and to its new fast-lane neighbours at the terminal node;
/// fast-lane vehicles keep it to each other at every node. Throws PlanningError with the
/// failing vehicle in the message.
std::vector<VehicleTrajectory> plan_all(const TerminalPlan& plan, const Scenario& scenario,
                                        const PlannerConfig& config);

/// True when plan_all succeeds for the plan.
bool plannable(const TerminalPlan& plan, const Scenario& scenario, const PlannerConfig& config);

struct SafetyAudit {
  double min_headway_slack = std::numeric_limits<double>::infinity();
  std::string worst_pair;
  double max_terminal_dx2 = 0.0;
  double max_terminal_dv2 = 0.0;
  double max_control_excess = 0.0;
  double max_speed_excess = 0.0;
  double max_dynamics_residual = 0.0;

  bool passes(double tol, double delta_x, double delta_v) const;
};

/// Checks a fast-lane ordering (front to back, ego included at its slot) together with U,
/// and F and B when present.
SafetyAudit audit_trajectories(const Scenario& scenario, std::span<const VehicleTrajectory> lane);

/// CSV with columns t,x,v,u,vehicle_id,role,source. The control column is empty on the
/// final node of each vehicle.
void write_trajectories_csv(std::ostream& os, std::span<const VehicleTrajectory> lane);
std::vector<VehicleTrajectory> read_trajectories_csv(std::istream& is);

}  // namespace lanechange
