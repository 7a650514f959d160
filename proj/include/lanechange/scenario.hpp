#pragma once

#include <optional>
#include <string>
#include <vector>

namespace lanechange {

/// Longitudinal state of one vehicle: absolute position on a straight road and speed.
struct VehicleState {
  double position = 0.0;  // m
  double speed = 0.0;     // m/s

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct ActuationLimits {
  double u_min = -7.0;  // m/s^2
  double u_max = 3.3;   // m/s^2
  double v_min = 5.0;   // m/s
  double v_max = 35.0;  // m/s
};

/// Speed-dependent headway: a follower at speed v needs epsilon + phi * v behind its leader.
struct SafetyParams {
  double epsilon = 10.0;  // m, standstill distance
  double phi = 0.2;       // s, reaction time
};

inline double required_gap(const SafetyParams& safety, double follower_speed) {
  return safety.epsilon + safety.phi * follower_speed;
}

/// Ego C and the slow vehicle U share the slow lane; F, the cooperators and B occupy the
/// fast lane, ordered front to back. Cooperator 1 is farthest ahead.
struct Scenario {
  VehicleState ego;
  VehicleState uncontrolled;
  std::optional<VehicleState> front;
  std::optional<VehicleState> back;
  std::vector<VehicleState> cooperators;
  ActuationLimits limits;
  SafetyParams safety;

  int cooperator_count() const { return static_cast<int>(cooperators.size()); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

enum class VehicleRole { ego, uncontrolled, front, back, cooperator };

struct VehicleRef {
  VehicleRole role = VehicleRole::ego;
  int index = 0;  // 1-based for cooperators, 0 otherwise

  friend bool operator==(const VehicleRef&, const VehicleRef&) = default;
};

std::string to_string(VehicleRole role);
std::string to_string(const VehicleRef& ref);

struct Violation {
  std::string constraint;
  std::vector<VehicleRef> vehicles;
  std::string message;
};

/// Checks limits, safety parameters, speed boxes and initial headways. An empty result
/// means the scenario is valid.
std::vector<Violation> validate_scenario(const Scenario& scenario);

/// Constant-speed extrapolation. Throws std::invalid_argument for negative t.
VehicleState predict_uncontrolled(const VehicleState& initial, double t);

/// Relative slack used when comparing gaps against the headway requirement.
inline constexpr double kGapRelTol = 1e-9;

}  // namespace lanechange
