#pragma once

#include <span>
#include <vector>

#include "lanechange/scenario.hpp"

namespace lanechange {

/// Weights that make position and flow disruption dimensionless and comparable.
struct DisruptionWeights {
  double gamma = 0.5;
  double t_avg = 10.0;  // s
  double v_d = 30.0;    // m/s, desired flow speed
  double gamma_x = 0.0; // 1/m^2
  double gamma_v = 0.0; // s^2/m^2
};

/// gamma_x scales squared position deviation by the worst-case displacement over t_avg;
/// gamma_v scales squared speed deviation by the worst-case deviation from v_d.
/// Throws std::invalid_argument on out-of-range inputs.
DisruptionWeights compute_weights(double gamma, double t_avg, double v_d, double v0,
                                  const ActuationLimits& limits);

/// Squared deviation of the final position from constant-speed cruising.
double position_disruption(const VehicleState& initial, const VehicleState& final_state, double t);

/// Squared deviation of the final speed from the desired flow speed.
double flow_disruption(const VehicleState& final_state, double v_d);

double total_disruption(const VehicleState& initial, const VehicleState& final_state, double t,
                        const DisruptionWeights& w);

struct VehicleDisruption {
  double position = 0.0;  // m^2
  double flow = 0.0;      // m^2/s^2
  double total = 0.0;     // dimensionless
};

VehicleDisruption vehicle_disruption(const VehicleState& initial, const VehicleState& final_state,
                                     double t, const DisruptionWeights& w);

struct DisruptionReport {
  std::vector<VehicleDisruption> per_vehicle;
  double global = 0.0;
  double pair = 0.0;
};

/// Sums per-cooperator totals. The pair value covers the cooperators directly ahead of and
/// behind merge slot `slot` (0..m); at either end only the single neighbour counts.
/// Throws std::out_of_range for an invalid slot.
DisruptionReport aggregate(std::span<const VehicleDisruption> per_vehicle, int slot);

/// Convenience: evaluates every cooperator and aggregates.
DisruptionReport evaluate_disruption(std::span<const VehicleState> initial,
                                     std::span<const VehicleState> final_states, double t,
                                     std::span<const DisruptionWeights> weights, int slot);

/// Settings shared by every vehicle in one coordination problem.
struct DisruptionSettings {
  double gamma = 0.5;
  double t_avg = 10.0;   // s
  double v_d = 30.0;     // m/s
  double gamma_t = 0.05; // 1/s, weight on terminal time in the unified problem
};

/// Per-vehicle weights; each vehicle is normalised by its own initial speed.
DisruptionWeights weights_for(const DisruptionSettings& settings, const VehicleState& initial,
                              const ActuationLimits& limits);
std::vector<DisruptionWeights> cooperator_weights(const DisruptionSettings& settings,
                                                  const Scenario& scenario);

}  // namespace lanechange
