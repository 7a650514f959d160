#pragma once

// Brute-force reference solutions used by the unit and acceptance tests. Nothing here calls
// the solvers under test; reachability comes from bang-bang profiles and disruption from the
// raw squared deviations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lanechange/scenario.hpp"

namespace oracle {

using lanechange::ActuationLimits;
using lanechange::Scenario;
using lanechange::VehicleState;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Reachable position interval at time t for terminal speed v; empty when v itself is out of
// reach. Bang-bang: u_max then u_min gives the farthest point, the reverse the nearest.
struct Interval {
  bool ok = false;
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval reach_interval(const VehicleState& o, double v, double t, const ActuationLimits& l) {
  Interval r;
  const double a = l.u_min;
  const double b = l.u_max;
  if (v < o.speed + a * t - 1e-12 || v > o.speed + b * t + 1e-12) return r;
  if (v < l.v_min || v > l.v_max) return r;
  const double t_acc = std::clamp((v - o.speed - a * t) / (b - a), 0.0, t);
  const double t_dec = t - t_acc;
  const double v1 = o.speed + b * t_acc;
  r.hi = o.position + o.speed * t_acc + 0.5 * b * t_acc * t_acc + v1 * t_dec + 0.5 * a * t_dec * t_dec;
  const double v2 = o.speed + a * t_dec;
  r.lo = o.position + o.speed * t_dec + 0.5 * a * t_dec * t_dec + v2 * t_acc + 0.5 * b * t_acc * t_acc;
  r.ok = true;
  return r;
}

struct Weights {
  double gx = 0.0;
  double gv = 0.0;
};

// Same normalisation as the library, written out again from its definition.
inline Weights weights(double gamma, double t_avg, double v_d, double v0, const ActuationLimits& l) {
  const double sx = std::max(std::abs(l.v_max - v0), std::abs(l.v_min - v0)) * t_avg;
  const double sv = std::max(std::abs(l.v_max - v_d), std::abs(l.v_min - v_d));
  return {gamma / (sx * sx), (1.0 - gamma) / (sv * sv)};
}

struct GridPoint {
  double x = 0.0;
  double v = 0.0;
  double cost = 0.0;
};

struct ChainVehicle {
  VehicleState origin;
  Weights w;
  bool fixed = false;  // fixed terminal state
  VehicleState terminal;
};

struct Settings {
  double gamma = 0.5;
  double t_avg = 10.0;
  double v_d = 30.0;
  double gamma_t = 0.05;
  double dx = 0.1;
  double dv = 0.05;
};

// Candidate terminal states of one vehicle with cost at most `budget`, snapped to the global
// grid (multiples of dx and dv) and restricted to its reachable set at t.
inline std::vector<GridPoint> candidates(const ChainVehicle& c, double t, double v_d,
                                         const ActuationLimits& l, const Settings& st,
                                         double budget) {
  std::vector<GridPoint> out;
  if (c.fixed) {
    const auto r = reach_interval(c.origin, c.terminal.speed, t, l);
    (void)r;
    const double dxv = c.terminal.position - (c.origin.position + c.origin.speed * t);
    const double dvv = c.terminal.speed - v_d;
    out.push_back({c.terminal.position, c.terminal.speed, c.w.gx * dxv * dxv + c.w.gv * dvv * dvv});
    return out;
  }
  const double xhat = c.origin.position + c.origin.speed * t;
  const double rx = c.w.gx > 0 ? std::sqrt(budget / c.w.gx) : 1e6;
  const double rv = c.w.gv > 0 ? std::sqrt(budget / c.w.gv) : 1e6;
  const double v_lo = std::max({l.v_min, v_d - rv, c.origin.speed + l.u_min * t});
  const double v_hi = std::min({l.v_max, v_d + rv, c.origin.speed + l.u_max * t});
  for (long iv = static_cast<long>(std::ceil(v_lo / st.dv)); iv * st.dv <= v_hi; ++iv) {
    const double v = iv * st.dv;
    const auto r = reach_interval(c.origin, v, t, l);
    if (!r.ok) continue;
    const double cv = c.w.gv * (v - v_d) * (v - v_d);
    if (cv > budget) continue;
    const double x_lo = std::max(r.lo, xhat - rx);
    const double x_hi = std::min(r.hi, xhat + rx);
    for (long ix = static_cast<long>(std::ceil(x_lo / st.dx)); ix * st.dx <= x_hi; ++ix) {
      const double x = ix * st.dx;
      const double cost = cv + c.w.gx * (x - xhat) * (x - xhat);
      if (cost <= budget) out.push_back({x, v, cost});
    }
  }
  return out;
}

// Minimum total cost of a front-to-back chain where each vehicle keeps eps + phi v behind its
// predecessor. Leading and trailing fixed obstacles are optional; `unary` filters points.
template <typename Unary>
double chain_min(const std::vector<ChainVehicle>& chain, double t, const Scenario& s,
                 const Settings& st, double budget, const std::optional<VehicleState>& lead,
                 const std::optional<VehicleState>& tail, Unary&& unary) {
  const double eps = s.safety.epsilon;
  const double phi = s.safety.phi;
  // Value table of the previous vehicle: (x, best cost) sorted by x with suffix minima.
  std::vector<std::pair<double, double>> prev;
  bool first = true;
  for (std::size_t idx = 0; idx < chain.size(); ++idx) {
    auto pts = candidates(chain[idx], t, st.v_d, s.limits, st, budget);
    std::vector<std::pair<double, double>> cur;
    cur.reserve(pts.size());
    for (const auto& p : pts) {
      if (!unary(idx, p)) continue;
      double c = p.cost;
      if (first) {
        if (lead && lead->position - p.x < eps + phi * p.v - 1e-9) continue;
      } else {
        const double need = p.x + eps + phi * p.v - 1e-9;
        auto it = std::lower_bound(prev.begin(), prev.end(), std::make_pair(need, -kInf));
        if (it == prev.end()) continue;
        c += it->second;
      }
      if (idx + 1 == chain.size() && tail && p.x - tail->position < eps + phi * tail->speed - 1e-9) continue;
      if (c <= budget) cur.emplace_back(p.x, c);
    }
    if (cur.empty()) return kInf;
    std::sort(cur.begin(), cur.end());
    for (std::size_t k = cur.size() - 1; k-- > 0;) cur[k].second = std::min(cur[k].second, cur[k + 1].second);
    prev = std::move(cur);
    first = false;
  }
  if (prev.empty()) return 0.0;
  return prev.front().second;  // suffix minimum over all x
}

inline std::optional<VehicleState> predict(const std::optional<VehicleState>& s, double t) {
  if (!s) return std::nullopt;
  return VehicleState{s->position + s->speed * t, s->speed};
}

// Fixed ego terminal state and t_f: minimum of the cooperators' disruption over all slots.
inline double problem1(const Scenario& s, double t, const VehicleState& ego, const Settings& st,
                       double budget) {
  double best = kInf;
  const int m = s.cooperator_count();
  for (int k = 0; k <= m; ++k) {
    std::vector<ChainVehicle> chain;
    for (int i = 1; i <= k; ++i) {
      const auto& o = s.cooperators[static_cast<std::size_t>(i - 1)];
      chain.push_back({o, weights(st.gamma, st.t_avg, st.v_d, o.speed, s.limits), false, {}});
    }
    chain.push_back({s.ego, {0.0, 0.0}, true, ego});
    for (int i = k + 1; i <= m; ++i) {
      const auto& o = s.cooperators[static_cast<std::size_t>(i - 1)];
      chain.push_back({o, weights(st.gamma, st.t_avg, st.v_d, o.speed, s.limits), false, {}});
    }
    const double v = chain_min(chain, t, s, st, std::min(budget, best), predict(s.front, t),
                               predict(s.back, t), [](std::size_t, const GridPoint&) { return true; });
    best = std::min(best, v);
  }
  return best;
}

// Unified problem on a t_f grid: gamma_t t + ego disruption + cooperator disruption.
inline double problem2(const Scenario& s, const Settings& st, double t_lb, double t_max, double dt,
                       double budget) {
  double best = kInf;
  const int m = s.cooperator_count();
  const auto wc = weights(st.gamma, st.t_avg, st.v_d, s.ego.speed, s.limits);
  for (long it = 0;; ++it) {
    const double t = t_lb + dt * static_cast<double>(it);
    if (t > t_max + 1e-12) break;
    const double time_cost = st.gamma_t * t;
    const double remaining = std::min(budget, best) - time_cost;
    if (remaining < 0.0) break;  // later t only cost more
    const VehicleState u{s.uncontrolled.position + s.uncontrolled.speed * t, s.uncontrolled.speed};
    for (int k = 0; k <= m; ++k) {
      std::vector<ChainVehicle> chain;
      std::size_t ego_idx = 0;
      for (int i = 1; i <= k; ++i) {
        const auto& o = s.cooperators[static_cast<std::size_t>(i - 1)];
        chain.push_back({o, weights(st.gamma, st.t_avg, st.v_d, o.speed, s.limits), false, {}});
      }
      ego_idx = chain.size();
      chain.push_back({s.ego, wc, false, {}});
      for (int i = k + 1; i <= m; ++i) {
        const auto& o = s.cooperators[static_cast<std::size_t>(i - 1)];
        chain.push_back({o, weights(st.gamma, st.t_avg, st.v_d, o.speed, s.limits), false, {}});
      }
      const double cap = std::min(budget, best) - time_cost;
      if (cap < 0.0) break;
      const double v = chain_min(chain, t, s, st, cap, predict(s.front, t), predict(s.back, t),
                                 [&](std::size_t idx, const GridPoint& p) {
                                   if (idx != ego_idx) return true;
                                   return u.position - p.x >= s.safety.epsilon + s.safety.phi * p.v - 1e-9;
                                 });
      best = std::min(best, v + time_cost);
    }
  }
  return best;
}

}  // namespace oracle
