#pragma once

#include <random>
#include <vector>

#include "lanechange/scenario.hpp"

namespace lanechange {

/// Half-width and midpoint of the control interval: u_min = nu - mu, u_max = nu + mu.
struct ReachabilityParams {
  double mu = 0.0;
  double nu = 0.0;

  static ReachabilityParams from_limits(const ActuationLimits& limits);
  double u_min() const { return nu - mu; }
  double u_max() const { return nu + mu; }
};

// Boundary functions of the double-integrator reachable set at time t > 0 from `origin`.
// p_upper <= 0 bounds the position from below (decelerate-then-accelerate extreme) and
// p_lower >= 0 bounds it from above (accelerate-then-decelerate extreme). Both throw
// std::invalid_argument for t <= 0.
double p_upper(double x, double v, double t, const VehicleState& origin,
               const ReachabilityParams& params);
double p_lower(double x, double v, double t, const VehicleState& origin,
               const ReachabilityParams& params);

/// Absolute tolerance applied to the boundary values at time t.
double membership_tolerance(double t, double rel_tol = 1e-9);

struct Membership {
  bool member = false;
  double p_upper = 0.0;
  double p_lower = 0.0;
  double tolerance = 0.0;
  bool speed_ok = false;
};

/// Both boundary conditions and the speed box must hold.
Membership classify(double x, double v, double t, const VehicleState& origin,
                    const ActuationLimits& limits, double rel_tol = 1e-9);

inline bool contains(double x, double v, double t, const VehicleState& origin,
                     const ActuationLimits& limits, double rel_tol = 1e-9) {
  return classify(x, v, t, origin, limits, rel_tol).member;
}

/// Terminal state after holding one constant control for t (speed saturation ignored).
VehicleState constant_control_endpoint(const VehicleState& origin, double u, double t);

/// Endpoints of `n` random piecewise-constant admissible controls (speed saturates at the box
/// by holding zero control) followed by the constant-u_max and constant-u_min endpoints
/// whenever those stay inside the speed box.
std::vector<VehicleState> sample_boundary_and_interior(const VehicleState& origin,
                                                       const ActuationLimits& limits, double t,
                                                       int n, std::mt19937_64& rng,
                                                       int max_segments = 6);

}  // namespace lanechange
