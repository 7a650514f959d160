#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanechange/convex_solver.hpp"
#include "lanechange/disruption.hpp"
#include "lanechange/scenario.hpp"

namespace lanechange {

struct SolverConfig {
  double t_lb = 0.5;    // s
  double t_max = 20.0;  // s
  int grid_points = 40;
  double golden_tol = 1e-3;  // s
  int golden_iterations = 40;
  double verify_tol = 1e-6;
  double big_m = 1e5;  // m, only used by the big-M cross-check
  ConvexSolverOptions inner;
};

/// B_i = 1 iff cooperator i (1-based) ends behind the ego, i.e. i > slot.
/// Throws std::out_of_range unless 0 <= slot <= m.
std::vector<int> slot_to_binaries(int slot, int m);

/// Variable layout of the terminal problem: (x_i, v_i) per cooperator, then the ego pair
/// when the ego's terminal state is a decision variable.
struct TerminalLayout {
  int m = 0;
  bool ego_free = false;

  int num_vars() const { return 2 * m + (ego_free ? 2 : 0); }
  int x(int i) const { return 2 * (i - 1); }  // cooperator i, 1-based
  int v(int i) const { return 2 * (i - 1) + 1; }
  int ego_x() const { return 2 * m; }
  int ego_v() const { return 2 * m + 1; }
};

/// A vehicle inside a constraint row: decision variables (xi, vi >= 0) or a fixed state.
struct RowVehicle {
  int xi = -1;
  int vi = -1;
  VehicleState fixed;
  std::string name;

  static RowVehicle variable(int xi, int vi, std::string name) { return {xi, vi, {}, std::move(name)}; }
  static RowVehicle constant(const VehicleState& s, std::string name) { return {-1, -1, s, std::move(name)}; }
};

/// (x_follower + phi v_follower + eps - x_leader - relax) / eps <= 0, labelled
/// "<kind>:<leader>-<follower>".
ConvexConstraint make_gap_row(int num_vars, const RowVehicle& leader, const RowVehicle& follower,
                              const SafetyParams& safety, const std::string& kind,
                              double relax = 0.0);

/// Both reachability boundaries and the speed box of one variable vehicle at time t_f.
void add_vehicle_rows(std::vector<ConvexConstraint>& rows, int num_vars, const RowVehicle& vehicle,
                      const VehicleState& origin, double t_f, const ActuationLimits& limits);

/// Adds D for one vehicle to a separable objective.
void add_disruption_term(SeparableQuadratic& q, int xi, int vi, const VehicleState& initial,
                         double t, const DisruptionWeights& w);

/// Endpoint of the constant control that moves the speed toward v_d as far as the limits allow.
VehicleState tracking_endpoint(const VehicleState& origin, double v_d, double t,
                               const ActuationLimits& limits);

/// Constraint system for one merge slot at terminal time t_f. Gap rows are divided by
/// epsilon, reachability rows by max(1, t_f^2 / 2) and speed rows by the speed range, so a
/// value of g <= 0 means satisfied. Without `ego_terminal` the ego state is free and its own
/// reachability, speed box and the gap behind U are added.
ConvexProblem build_constraints(const Scenario& scenario, int slot, double t_f,
                                const std::optional<VehicleState>& ego_terminal);

/// Same rows, but with both halves of each ego/cooperator ordering pair relaxed by
/// big_m * B_i or big_m * (1 - B_i). Test oracle for the slot enumeration.
ConvexProblem build_big_m_constraints(const Scenario& scenario, std::span<const int> binaries,
                                      double t_f, const std::optional<VehicleState>& ego_terminal,
                                      double big_m);

/// Disruption objective for the layout: sum of cooperator D_i plus D_c when the ego is free.
SeparableQuadratic disruption_objective(const Scenario& scenario, double t_f,
                                        const DisruptionSettings& settings, bool ego_free);

struct InnerResult {
  ConvexStatus status = ConvexStatus::iteration_limit;
  Eigen::VectorXd z;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  int starts_used = 0;
};

/// Runs the convex solver from each start in order. Later starts are only tried while no
/// earlier one has reached optimality; the best optimal point is kept.
InnerResult inner_solve(const ConvexProblem& problem, std::span<const Eigen::VectorXd> starts,
                        const ConvexSolverOptions& options);

/// Start points: constant-speed extrapolation, then tracking v_d as fast as the limits allow.
std::vector<Eigen::VectorXd> default_starts(const Scenario& scenario, double t_f,
                                            const DisruptionSettings& settings,
                                            const std::optional<VehicleState>& ego_terminal);

struct TerminalPlan {
  double t_f = 0.0;
  int slot = 0;
  VehicleState ego_terminal;
  std::vector<VehicleState> cooperator_terminals;
  DisruptionReport report;
  double ego_disruption = 0.0;
  double objective = 0.0;
};

enum class CoordinationStatus { feasible, infeasible, solver_failure };

std::string to_string(CoordinationStatus status);

struct SlotResult {
  int slot = 0;
  ConvexStatus status = ConvexStatus::iteration_limit;
  double objective = 0.0;
};

struct CoordinationOutcome {
  CoordinationStatus status = CoordinationStatus::infeasible;
  TerminalPlan plan;
  std::vector<SlotResult> slots;  // last evaluated t_f
  int inner_solves = 0;
};

/// Terminal states of all cooperators for a given t_f and ego terminal state, minimising the
/// global disruption over every slot. Equal objectives resolve to the smaller slot.
CoordinationOutcome solve_problem1(const Scenario& scenario, double t_f,
                                   const VehicleState& ego_terminal,
                                   const DisruptionSettings& settings, const SolverConfig& config);

/// Best plan at a fixed t_f with the ego terminal state free; objective includes gamma_t * t_f.
CoordinationOutcome solve_unified_at(const Scenario& scenario, double t_f,
                                     const DisruptionSettings& settings,
                                     const SolverConfig& config);

/// Extra acceptance test for candidate plans, typically trajectory feasibility.
using PlanFilter = std::function<bool(const TerminalPlan&)>;

/// Unified problem: t_f on a grid over [t_lb, t_max] refined by golden-section search,
/// slot enumeration and the ego terminal state as decision variables. A t_f whose best plan
/// is rejected by `accept` counts as infeasible.
CoordinationOutcome solve_unified_p2(const Scenario& scenario, const DisruptionSettings& settings,
                                     const SolverConfig& config, const PlanFilter& accept = {});

/// Independent re-check of a plan: reachability of every terminal state, speed boxes and the
/// fast-lane ordering implied by the slot. `check_ego_u` adds the gap behind U.
std::vector<std::string> verify_plan(const Scenario& scenario, const TerminalPlan& plan,
                                     bool check_ego_u, double tol = 1e-6);

}  // namespace lanechange
