#include "lanechange/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lanechange {

ReachabilityParams ReachabilityParams::from_limits(const ActuationLimits& limits) {
  return {(limits.u_max - limits.u_min) / 2.0, (limits.u_max + limits.u_min) / 2.0};
}

namespace {

void require_positive_time(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("reachability: t must be positive");
}

// Position offset relative to the drift of the mid control.
double drift_offset(double x, double t, const VehicleState& o, const ReachabilityParams& p) {
  return x - o.position - t * o.speed - p.nu * t * t / 2.0;
}

}  // namespace

double p_upper(double x, double v, double t, const VehicleState& origin,
               const ReachabilityParams& params) {
  require_positive_time(t);
  const double a = (v - origin.speed - params.nu * t) / params.mu + t;
  return -t * t / 2.0 + 0.25 * a * a - drift_offset(x, t, origin, params) / params.mu;
}

double p_lower(double x, double v, double t, const VehicleState& origin,
               const ReachabilityParams& params) {
  require_positive_time(t);
  const double a = (-v + origin.speed + params.nu * t) / params.mu + t;
  return t * t / 2.0 - 0.25 * a * a - drift_offset(x, t, origin, params) / params.mu;
}

double membership_tolerance(double t, double rel_tol) {
  return rel_tol * std::max(1.0, t * t / 2.0);
}

Membership classify(double x, double v, double t, const VehicleState& origin,
                    const ActuationLimits& limits, double rel_tol) {
  const auto params = ReachabilityParams::from_limits(limits);
  Membership m;
  m.p_upper = p_upper(x, v, t, origin, params);
  m.p_lower = p_lower(x, v, t, origin, params);
  m.tolerance = membership_tolerance(t, rel_tol);
  const double vtol = rel_tol * std::max(1.0, std::abs(limits.v_max));
  m.speed_ok = v >= limits.v_min - vtol && v <= limits.v_max + vtol;
  m.member = m.p_upper <= m.tolerance && m.p_lower >= -m.tolerance && m.speed_ok;
  return m;
}

VehicleState constant_control_endpoint(const VehicleState& origin, double u, double t) {
  return {origin.position + origin.speed * t + 0.5 * u * t * t, origin.speed + u * t};
}

namespace {

// Integrates one constant-control segment, holding the speed once it reaches the box.
void advance_saturated(double& x, double& v, double u, double dt, const ActuationLimits& lim) {
  double hit = dt;
  if (u > 0.0 && v + u * dt > lim.v_max) hit = std::max(0.0, (lim.v_max - v) / u);
  if (u < 0.0 && v + u * dt < lim.v_min) hit = std::max(0.0, (lim.v_min - v) / u);
  x += v * hit + 0.5 * u * hit * hit;
  v += u * hit;
  if (hit < dt) {
    v = std::clamp(v, lim.v_min, lim.v_max);
    x += v * (dt - hit);
  }
}

}  // namespace

std::vector<VehicleState> sample_boundary_and_interior(const VehicleState& origin,
                                                       const ActuationLimits& limits, double t,
                                                       int n, std::mt19937_64& rng,
                                                       int max_segments) {
  if (n < 1) throw std::invalid_argument("sample_boundary_and_interior: n must be >= 1");
  require_positive_time(t);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> segs(1, std::max(1, max_segments));
  std::uniform_real_distribution<double> control(limits.u_min, limits.u_max);

  std::vector<VehicleState> out;
  out.reserve(static_cast<std::size_t>(n) + 2);
  for (int i = 0; i < n; ++i) {
    const int k = segs(rng);
    std::vector<double> cuts(static_cast<std::size_t>(k - 1));
    for (auto& c : cuts) c = unit(rng) * t;
    cuts.push_back(0.0);
    cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    double x = origin.position;
    double v = origin.speed;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      // Occasionally pick an extreme so the boundary gets exercised too.
      const double r = unit(rng);
      const double u = r < 0.15 ? limits.u_min : (r < 0.3 ? limits.u_max : control(rng));
      advance_saturated(x, v, u, cuts[s + 1] - cuts[s], limits);
    }
    out.push_back({x, v});
  }
  for (double u : {limits.u_max, limits.u_min}) {
    const auto extreme = constant_control_endpoint(origin, u, t);
    if (extreme.speed >= limits.v_min && extreme.speed <= limits.v_max) out.push_back(extreme);
  }
  return out;
}

}  // namespace lanechange
