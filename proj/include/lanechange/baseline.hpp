#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lanechange/disruption.hpp"
#include "lanechange/terminal_coordination.hpp"
#include "lanechange/trajectory.hpp"

namespace lanechange {

enum class PairVariant { position_only, full_disruption };
enum class TerminalSpeedMode { hard_constraint, terminal_cost };

std::string to_string(PairVariant v);
std::string to_string(TerminalSpeedMode m);

struct IdmParams {
  double desired_speed = 30.0;     // m/s
  double max_accel = 1.4;          // m/s^2
  double comfortable_decel = 2.0;  // m/s^2
  double accel_exponent = 4.0;
  double min_gap = 2.0;       // m
  double time_headway = 1.5;  // s
};

struct IdmOutput {
  double acceleration = 0.0;
  bool emergency = false;  // non-positive gap, clamped to u_min
};

/// Intelligent driver model. The gap is measured front to front; without a leader only the
/// free-road term applies. The result is clamped to [u_min, u_max].
IdmOutput idm_acceleration(const VehicleState& self, const std::optional<VehicleState>& leader,
                           const IdmParams& p, const ActuationLimits& limits);

/// Simulates an IDM vehicle behind a leader trajectory on the leader's grid. Controls are
/// evaluated at each node and held; they are trimmed so the speed box holds at the next node.
Trajectory simulate_idm_follower(const VehicleState& initial, const Trajectory& leader,
                                 const IdmParams& p, const ActuationLimits& limits,
                                 int* emergencies = nullptr);

struct BaselineConfig {
  double alpha = 0.5;  // time vs energy weight in the ego problem
  double d_th = 0.05;  // disruption threshold
  double lambda = 1.2; // terminal-time relaxation factor
  int max_iters = 12;
  PairVariant variant = PairVariant::full_disruption;
  TerminalSpeedMode terminal_speed_mode = TerminalSpeedMode::terminal_cost;
  double speed_tolerance = 0.5;       // m/s, hard terminal band and position-only pair band
  double terminal_cost_weight = 0.01; // s^2/m^2, weight on (v_C(t_f) - v_d)^2
  IdmParams idm;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;

  static BaselineConfig position_only();
  static BaselineConfig full_disruption();
};

struct EgoPlan {
  double t_f = 0.0;
  double objective = 0.0;
  Trajectory trajectory;
  VehicleState terminal;
};

/// Ego-only problem at a fixed terminal time: alpha t_f / T_max plus (1 - alpha) times the
/// energy normalised by 0.5 u_max^2 T_max, with the U headway at every node. The terminal
/// speed is either banded around v_d or penalised. Empty when infeasible.
std::optional<EgoPlan> step1_ego_plan_at(const Scenario& scenario, double t_f, double v_d,
                                         const BaselineConfig& config, const SolverConfig& solver,
                                         const PlannerConfig& planner);

/// Same problem with t_f searched over [t_lb, t_max] (grid, then golden section).
std::optional<EgoPlan> step1_ego_plan(const Scenario& scenario, double v_d,
                                      const BaselineConfig& config, const SolverConfig& solver,
                                      const PlannerConfig& planner);

struct PairSelection {
  int slot = 0;                       // ego ends between cooperators slot and slot + 1
  std::vector<int> members;           // 1-based cooperator indices, one or two
  std::vector<VehicleState> terminals;
  double objective = 0.0;             // variant metric
  double disruption = 0.0;            // full D over the members
};

/// Step 2: for every slot, moves only the adjacent cooperators (others cruise) and keeps the
/// cheapest feasible slot under the variant's metric. Ties go to the smaller slot.
std::optional<PairSelection> step2_select_pair(const Scenario& scenario, double t_f,
                                               const VehicleState& ego_terminal,
                                               const DisruptionSettings& settings,
                                               PairVariant variant, double speed_tolerance,
                                               const ConvexSolverOptions& options);

/// Fast-lane trajectories for a baseline result: cruising ahead of the pair, planned pair,
/// the ego's Step 1 trajectory, IDM behind the pair. Throws PlanningError.
std::vector<VehicleTrajectory> assemble_baseline(const Scenario& scenario, const EgoPlan& ego,
                                                 const PairSelection& pair,
                                                 const IdmParams& idm,
                                                 const PlannerConfig& planner);

enum class IterativeMode { baseline, pa1 };

struct IterationRecord {
  double t_f = 0.0;
  double seconds = 0.0;  // optimisation blocks only
  bool accepted = false;
  std::string note;
};

struct IterativeResult {
  bool feasible = false;
  int n_iter = 0;
  std::vector<IterationRecord> iterations;
  double t_f_star = 0.0;  // Step 1 optimum before relaxation
  TerminalPlan plan;      // accepted terminal states (pair only for the baselines)
  std::optional<PairSelection> pair;
  std::vector<VehicleTrajectory> trajectories;
  std::string failure;
};

/// Step 1, then Step 2 (baseline) or Problem 1 (pa1), then the threshold test; on failure the
/// terminal time is relaxed to t_f* lambda^k and Steps 1-2 are repeated at that time.
IterativeResult run_iterative(const Scenario& scenario, const DisruptionSettings& settings,
                              const BaselineConfig& config, IterativeMode mode,
                              const SolverConfig& solver, const PlannerConfig& planner);

}  // namespace lanechange
