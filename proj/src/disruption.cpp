#include "lanechange/disruption.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lanechange {

DisruptionWeights compute_weights(double gamma, double t_avg, double v_d, double v0,
                                  const ActuationLimits& limits) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("compute_weights: gamma must lie in [0, 1]");
  }
  if (!(t_avg > 0.0)) {
    throw std::invalid_argument("compute_weights: t_avg must be positive");
  }
  if (!(v0 >= limits.v_min && v0 <= limits.v_max) ||
      !(v_d >= limits.v_min && v_d <= limits.v_max)) {
    throw std::invalid_argument("compute_weights: speeds must lie within [v_min, v_max]");
  }
  const double dev_v0 = std::max(std::abs(limits.v_max - v0), std::abs(limits.v_min - v0));
  const double dev_vd = std::max(std::abs(limits.v_max - v_d), std::abs(limits.v_min - v_d));
  if (dev_v0 <= 0.0 || dev_vd <= 0.0) {
    throw std::invalid_argument("compute_weights: degenerate speed range");
  }
  DisruptionWeights w;
  w.gamma = gamma;
  w.t_avg = t_avg;
  w.v_d = v_d;
  const double pos_scale = dev_v0 * t_avg;
  w.gamma_x = gamma / (pos_scale * pos_scale);
  w.gamma_v = (1.0 - gamma) / (dev_vd * dev_vd);
  return w;
}

double position_disruption(const VehicleState& initial, const VehicleState& final_state,
                           double t) {
  const double d = final_state.position - (initial.position + initial.speed * t);
  return d * d;
}

double flow_disruption(const VehicleState& final_state, double v_d) {
  const double d = final_state.speed - v_d;
  return d * d;
}

double total_disruption(const VehicleState& initial, const VehicleState& final_state, double t,
                        const DisruptionWeights& w) {
  return w.gamma_x * position_disruption(initial, final_state, t) +
         w.gamma_v * flow_disruption(final_state, w.v_d);
}

VehicleDisruption vehicle_disruption(const VehicleState& initial, const VehicleState& final_state,
                                     double t, const DisruptionWeights& w) {
  VehicleDisruption d;
  d.position = position_disruption(initial, final_state, t);
  d.flow = flow_disruption(final_state, w.v_d);
  d.total = w.gamma_x * d.position + w.gamma_v * d.flow;
  return d;
}

DisruptionReport aggregate(std::span<const VehicleDisruption> per_vehicle, int slot) {
  const int m = static_cast<int>(per_vehicle.size());
  if (slot < 0 || slot > m) {
    throw std::out_of_range("aggregate: slot " + std::to_string(slot) + " outside [0, " +
                            std::to_string(m) + "]");
  }
  DisruptionReport r;
  r.per_vehicle.assign(per_vehicle.begin(), per_vehicle.end());
  for (const auto& d : per_vehicle) r.global += d.total;
  // Slot k sits between cooperator k (ahead) and k + 1 (behind), 1-based.
  if (slot >= 1) r.pair += per_vehicle[slot - 1].total;
  if (slot < m) r.pair += per_vehicle[slot].total;
  return r;
}

DisruptionReport evaluate_disruption(std::span<const VehicleState> initial,
                                     std::span<const VehicleState> final_states, double t,
                                     std::span<const DisruptionWeights> weights, int slot) {
  if (initial.size() != final_states.size() || initial.size() != weights.size()) {
    throw std::invalid_argument("evaluate_disruption: inconsistent vehicle count");
  }
  std::vector<VehicleDisruption> per;
  per.reserve(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) {
    per.push_back(vehicle_disruption(initial[i], final_states[i], t, weights[i]));
  }
  return aggregate(per, slot);
}

DisruptionWeights weights_for(const DisruptionSettings& settings, const VehicleState& initial,
                              const ActuationLimits& limits) {
  return compute_weights(settings.gamma, settings.t_avg, settings.v_d, initial.speed, limits);
}

std::vector<DisruptionWeights> cooperator_weights(const DisruptionSettings& settings,
                                                  const Scenario& scenario) {
  std::vector<DisruptionWeights> out;
  out.reserve(scenario.cooperators.size());
  for (const auto& c : scenario.cooperators) {
    out.push_back(weights_for(settings, c, scenario.limits));
  }
  return out;
}

}  // namespace lanechange
