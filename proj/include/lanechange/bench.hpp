#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lanechange/baseline.hpp"
#include "lanechange/disruption.hpp"
#include "lanechange/terminal_coordination.hpp"
#include "lanechange/trajectory.hpp"

namespace lanechange {

enum class Method { baseline_position, baseline_full, pa1, pa2 };

/// Names used in files and on the command line: baseline-position, baseline-full, pa1, pa2.
std::string to_string(Method m);
/// Throws std::invalid_argument for an unknown name.
Method method_from_string(const std::string& name);
const std::vector<Method>& all_methods();

struct GeneratorConfig {
  double ego_speed = 23.0;          // m/s
  double uncontrolled_speed = 20.0; // m/s
  // Extra gap between U and the ego on top of the ego's required headway.
  double u_extra_gap_min = 30.0;  // m
  double u_extra_gap_max = 40.0;  // m
  double v_d_min = 25.0;  // m/s
  double v_d_max = 35.0;  // m/s
  double speed_jitter = 2.0;     // m/s, cooperator speeds in v_d +/- jitter
  double spacing_jitter = 15.0;  // m, added on top of the required gap
  // Speeds are assigned non-increasing front to back, so cruising cooperators never close in.
  bool sort_speeds = true;
  // Extra spacing max(0, v_follower - v_leader) * closure_horizon; only matters unsorted.
  double closure_horizon = 20.0;  // s
  // The platoon's midpoint is placed uniformly in this window relative to the ego.
  double platoon_offset_min = -15.0;  // m
  double platoon_offset_max = 15.0;   // m
  int max_attempts = 100;
  ActuationLimits limits;
  SafetyParams safety;

  void validate() const;
};

struct GeneratedScenario {
  Scenario scenario;
  double v_d = 30.0;
  int attempts = 1;
};

/// Deterministic per (seed, m). Retries until validate_scenario passes; throws
/// std::runtime_error after max_attempts.
GeneratedScenario generate_scenario(std::uint64_t seed, int m, const GeneratorConfig& config);

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds;
  std::vector<int> cooperator_counts;
  std::vector<Method> methods;
  GeneratorConfig generator;
  DisruptionSettings disruption;  // v_d is replaced per scenario
  SolverConfig solver;
  PlannerConfig planner;
  BaselineConfig baseline;  // variant and terminal speed mode are set per method
  bool idm_speed_from_v_d = true;
  bool write_trajectories = true;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct MethodReport {
  std::uint64_t seed = 0;
  int m = 0;
  Method method = Method::pa2;
  double v_d = 0.0;
  bool feasible = false;
  double t_f_star = 0.0;         // executed terminal time
  double t_f_initial = 0.0;      // first attempted terminal time
  double pair_disruption = 0.0;  // cooperators directly around the ego's slot
  double global_disruption = 0.0;
  int n_iter = 0;
  double t_iter_avg = 0.0;  // s
  int slot = -1;
  std::string failure;
  std::vector<IterationRecord> iterations;
  std::vector<VehicleTrajectory> trajectories;
  std::vector<VehicleState> cooperator_terminals;  // from the trajectories
  std::optional<SafetyAudit> audit;
  bool audit_passed = false;

  std::string run_id() const;
};

/// Runs one method on one scenario. Never throws for solver or planner failures; they are
/// reported through `feasible` and `failure`.
MethodReport run_method(const Scenario& scenario, double v_d, Method method,
                        const ExperimentConfig& config);

/// Pair and global disruption from terminal states, with the same weights as the solvers.
DisruptionReport score_terminals(const Scenario& scenario, double v_d, double t_f, int slot,
                                 const std::vector<VehicleState>& terminals,
                                 const DisruptionSettings& settings);

struct AggregateRow {
  int m = 0;
  Method method = Method::pa2;
  int runs = 0;
  int feasible = 0;
  // Means over feasible runs; NaN when none is feasible.
  double t_f_star = 0.0;
  double pair_disruption = 0.0;
  double global_disruption = 0.0;
  double n_iter = 0.0;
  double t_iter_avg = 0.0;
};

struct SuiteResult {
  std::vector<MethodReport> reports;  // sorted by (m, seed, method)
  std::vector<AggregateRow> table;    // sorted by (m, method)
  int threads = 1;
  double wall_seconds = 0.0;
};

/// Worker count from LANECHANGE_THREADS, else the hardware concurrency.
int default_thread_count();

SuiteResult run_suite(const ExperimentConfig& config, int threads = 0);

std::vector<AggregateRow> aggregate_reports(const std::vector<MethodReport>& reports);

inline constexpr int kResultsSchemaVersion = 1;

void write_results_csv(std::ostream& os, const std::vector<AggregateRow>& table);
void write_runs_csv(std::ostream& os, const std::vector<MethodReport>& reports);
void write_results_json(std::ostream& os, const SuiteResult& suite);
/// results.csv, runs.csv, results.json and trajectories/<run-id>.csv under `dir`.
void write_suite(const std::filesystem::path& dir, const SuiteResult& suite, bool trajectories);
void write_report(const std::filesystem::path& dir, const MethodReport& report);

/// Parses results.csv back (used by round-trip checks).
std::vector<AggregateRow> read_results_csv(std::istream& is);

}  // namespace lanechange
