#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_map>

#include "lanechange/reachability.hpp"
#include "lanechange/terminal_coordination.hpp"
#include "lanechange/trajectory.hpp"

using namespace lanechange;

namespace {

ActuationLimits loose() { return {-100.0, 100.0, 0.0, 100.0}; }

PlannerConfig tight(int n) {
  PlannerConfig c;
  c.intervals = n;
  c.delta_x = 1e-16;
  c.delta_v = 1e-16;
  return c;
}

double rest_to_rest(int n) {
  const auto t = plan_min_energy({0.0, 0.0}, {1.0, 0.0}, 1.0, {}, loose(), {}, tight(n));
  return energy(t);
}

// Forward dynamic programming over a speed lattice v0 + i dv. Exact ZOH then puts x on the
// lattice x0 + k dt v0 + j dt dv / 2, so every path is represented without interpolation.
// States whose accumulated cost already exceeds `budget` are dropped.
double dp_follower(const VehicleState& init, const VehicleState& target, double t_f, int n,
                   const std::vector<double>& leader_x, const ActuationLimits& lim,
                   const SafetyParams& safety, double tol_x, double tol_v, double dv, double budget) {
  const double dt = t_f / n;
  const double xq = dt * dv / 2.0;
  const long v0 = 0;
  const long du_lo = static_cast<long>(std::ceil(lim.u_min * dt / dv - 1e-9));
  const long du_hi = static_cast<long>(std::floor(lim.u_max * dt / dv + 1e-9));
  auto key = [](long vi, long xi) { return (static_cast<std::uint64_t>(vi) << 40) ^ static_cast<std::uint64_t>(xi + (1L << 39)); };
  struct S {
    long vi;
    long xi;
    double cost;
  };
  std::vector<S> layer{{v0, 0, 0.0}};
  for (int k = 0; k < n; ++k) {
    const double remaining = t_f - (k + 1) * dt;
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::vector<S> next;
    for (const auto& s : layer) {
      for (long d = du_lo; d <= du_hi; ++d) {
        const long vj = s.vi + d;
        const double v = init.speed + vj * dv;
        if (v < lim.v_min - 1e-12 || v > lim.v_max + 1e-12) continue;
        const double u = d * dv / dt;
        const double cost = s.cost + 0.5 * u * u * dt;
        // Lower bound on the energy still needed to bring v into the terminal band.
        const double need = std::max(0.0, std::abs(target.speed - v) - tol_v);
        const double rest = remaining > 0 ? 0.5 * need * need / remaining : (need > 1e-12 ? 1e300 : 0.0);
        if (cost + rest > budget) continue;
        const long xj = s.xi + s.vi + vj;
        const double x = init.position + (k + 1) * dt * init.speed + xj * xq;
        if (leader_x[static_cast<std::size_t>(k + 1)] - x < safety.epsilon + safety.phi * v - 1e-9) continue;
        const auto kk = key(vj, xj);
        auto it = index.find(kk);
        if (it == index.end()) {
          index.emplace(kk, next.size());
          next.push_back({vj, xj, cost});
        } else if (cost < next[it->second].cost) {
          next[it->second].cost = cost;
        }
      }
    }
    layer = std::move(next);
  }
  double best = 1e300;
  for (const auto& s : layer) {
    const double x = init.position + t_f * init.speed + s.xi * xq;
    if (std::abs(x - target.position) <= tol_x && std::abs(init.speed + s.vi * dv - target.speed) <= tol_v) {
      best = std::min(best, s.cost);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("energy of simple control sequences") {
  CHECK(energy(constant_speed_trajectory({0.0, 20.0}, 0.1, 10)) == 0.0);
  const std::vector<double> u(20, 1.0);
  CHECK(energy(propagate({0.0, 10.0}, u, 0.1)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-order-hold propagation is exact") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(-7.0, 3.3);
  std::vector<double> u(50);
  for (double& x : u) x = ud(rng);
  const double dt = 0.07;
  const auto t = propagate({3.0, 25.0}, u, dt);
  REQUIRE(t.positions.size() == 51);
  for (int k = 0; k < 50; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CHECK(t.positions[kk + 1] == doctest::Approx(t.positions[kk] + t.speeds[kk] * dt + 0.5 * u[kk] * dt * dt).epsilon(1e-14));
    CHECK(t.speeds[kk + 1] == doctest::Approx(t.speeds[kk] + u[kk] * dt).epsilon(1e-14));
  }
  CHECK(t.horizon() == doctest::Approx(3.5));
}

TEST_CASE("rest-to-rest minimum energy") {
  const double c100 = rest_to_rest(100);
  CHECK(c100 == doctest::Approx(6.0).epsilon(0.01));
  // Discrete optimum for piecewise-constant controls: 6 N^2 / (N^2 - 1).
  INFO(std::setprecision(17) << c100);
  CHECK(c100 == doctest::Approx(6.0 * 1e4 / (1e4 - 1.0)).epsilon(1e-6));
  const double e100 = std::abs(c100 - 6.0);
  const double e200 = std::abs(rest_to_rest(200) - 6.0);
  const double e400 = std::abs(rest_to_rest(400) - 6.0);
  CHECK(e100 / e200 >= 4.0);
  CHECK(e200 / e400 >= 4.0);
}

TEST_CASE("cruising target needs no control") {
  const VehicleState s{10.0, 25.0};
  const auto t = plan_min_energy(s, predict_uncontrolled(s, 4.0), 4.0, {}, {}, {}, {});
  CHECK(energy(t) < 1e-18);
  for (double u : t.controls) CHECK(std::abs(u) < 1e-9);
}

TEST_CASE("inactive inequalities give an affine control") {
  PlannerConfig cfg = tight(100);
  const auto d = plan_min_energy_detail({0.0, 20.0}, {65.0, 22.0}, 3.0, {}, ActuationLimits{}, {}, cfg);
  const auto& u = d.trajectory.controls;
  const int n = static_cast<int>(u.size());
  // Least-squares line through (k, u_k).
  double sk = 0, su = 0, skk = 0, sku = 0;
  for (int k = 0; k < n; ++k) {
    sk += k;
    su += u[static_cast<std::size_t>(k)];
    skk += 1.0 * k * k;
    sku += k * u[static_cast<std::size_t>(k)];
  }
  const double slope = (n * sku - sk * su) / (n * skk - sk * sk);
  const double icept = (su - slope * sk) / n;
  double dev = 0, scale = 0;
  for (int k = 0; k < n; ++k) {
    dev = std::max(dev, std::abs(u[static_cast<std::size_t>(k)] - (icept + slope * k)));
    scale = std::max(scale, std::abs(u[static_cast<std::size_t>(k)]));
  }
  CHECK(dev <= 1e-6 * scale);
  CHECK(std::abs(slope) > 1e-3);
}

TEST_CASE("planner throws with the blocking constraint") {
  // 200 m in 2 s from 20 m/s is far outside the reachable set.
  try {
    plan_min_energy({0.0, 20.0}, {200.0, 20.0}, 2.0, {}, {}, {}, {});
    FAIL("expected a planning error");
  } catch (const PlanningError& e) {
    CHECK_FALSE(e.constraint().empty());
  }
  CHECK_THROWS_AS(plan_min_energy({0.0, 20.0}, {40.0, 20.0}, 2.0, {}, {}, {}, PlannerConfig{5, 0.1, 0.1, 1e-6}),
                  std::invalid_argument);
}

TEST_CASE("follower behind a braking leader matches dynamic programming") {
  const int n = 10;
  const double t_f = 3.0;
  const double dt = t_f / n;
  // Leader holds 15 m/s for 1.5 s, then accelerates; the follower closes in from 20 m/s.
  std::vector<double> lx(n + 1), lv(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    const double s = std::max(0.0, t - 1.5);
    lx[static_cast<std::size_t>(k)] = 17.0 + 15.0 * t + 3.0 * s * s;
    lv[static_cast<std::size_t>(k)] = 15.0 + 6.0 * s;
  }
  const SafetyParams safety;
  const ActuationLimits lim;
  const VehicleState init{0.0, 20.0};
  const VehicleState target{54.0, 20.0};
  const std::vector<HeadwayPartner> partners{{lx, lv, true, false, "L"}};
  PlannerConfig cfg;
  cfg.intervals = n;
  const auto d = plan_min_energy_detail(init, target, t_f, partners, lim, safety, cfg);
  // dv = 0.015 puts both control limits on the lattice: 3.3 * 0.3 = 66 dv, 7 * 0.3 = 140 dv.
  CHECK(d.kkt.stationarity <= 1e-6);
  CHECK(d.kkt.primal <= 1e-6);
  // The headway is active somewhere strictly inside the horizon.
  bool interior_active = false;
  for (int row : d.solution.active) {
    const auto& l = d.row_labels[static_cast<std::size_t>(row)];
    if (l.rfind("headway:L@", 0) == 0 && l != "headway:L@" + std::to_string(n)) interior_active = true;
  }
  CHECK(interior_active);
  const double planned = energy(d.trajectory);
  const double dp = dp_follower(init, target, t_f, n, lx, lim, safety, std::sqrt(cfg.delta_x),
                                std::sqrt(cfg.delta_v), 0.015, 1.5 * planned + 1e-9);
  INFO("planner " << planned << " dp " << dp);
  REQUIRE(dp < 1e299);
  CHECK(planned <= dp * 1.02);
  CHECK(dp <= planned * 1.02);
}

TEST_CASE("planned controls are KKT points and beat feasible perturbations") {
  const int n = 40;
  std::vector<double> lx(n + 1), lv(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = 4.0 * k / n;
    lx[static_cast<std::size_t>(k)] = 30.0 + 22.0 * t;
    lv[static_cast<std::size_t>(k)] = 22.0;
  }
  PlannerConfig cfg;
  cfg.intervals = n;
  const std::vector<HeadwayPartner> partners{{lx, lv, true, false, "L"}};
  const auto d = plan_min_energy_detail({0.0, 25.0}, {90.0, 24.0}, 4.0, partners, {}, {}, cfg);
  CHECK(d.kkt.stationarity <= 1e-6);
  CHECK(d.kkt.primal <= 1e-6);
  CHECK(d.kkt.dual <= 1e-6);
  CHECK(d.kkt.complementarity <= 1e-6);

  const auto& qp = d.qp;
  const Eigen::VectorXd& z = d.solution.z;
  auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(qp.hessian * x) + qp.linear.dot(x); };
  const double f0 = f(z);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  int sampled = 0;
  for (int trial = 0; trial < 2000 && sampled < 100; ++trial) {
    Eigen::VectorXd dir(n);
    for (int j = 0; j < n; ++j) dir[j] = nd(rng);
    for (double step = 0.5; step > 1e-6; step *= 0.5) {
      const Eigen::VectorXd y = z + step * dir;
      if (((qp.a * y - qp.b).array() >= -1e-12).all()) {
        ++sampled;
        CHECK(f(y) >= f0 - 1e-10);
        break;
      }
    }
  }
  CHECK(sampled == 100);
}

TEST_CASE("zero-disruption plan yields coasting trajectories") {
  Scenario s;
  s.ego = {0.0, 30.0};
  s.uncontrolled = {100.0, 30.0};
  s.cooperators = {{40.0, 30.0}};
  TerminalPlan plan;
  plan.t_f = 3.0;
  plan.slot = 1;
  plan.ego_terminal = predict_uncontrolled(s.ego, 3.0);
  plan.cooperator_terminals = {predict_uncontrolled(s.cooperators[0], 3.0)};
  const auto lane = plan_all(plan, s, {});
  REQUIRE(lane.size() == 2);
  for (const auto& vt : lane) CHECK(energy(vt.trajectory) < 1e-16);
  CHECK(audit_trajectories(s, lane).passes(1e-6, 0.1, 0.1));
}

TEST_CASE("plans from the unified problem pass the safety audit") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {16.0, 20.0};
  s.cooperators = {{38.0, 29.0}, {8.0, 30.5}, {-25.0, 28.5}};
  REQUIRE(validate_scenario(s).empty());
  const auto unfiltered = solve_unified_p2(s, {}, {});
  REQUIRE(unfiltered.status == CoordinationStatus::feasible);
  const PlannerConfig pc;
  const auto out = solve_unified_p2(s, {}, {}, [&](const TerminalPlan& p) { return plannable(p, s, pc); });
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(out.plan.objective >= unfiltered.plan.objective - 1e-12);
  const auto lane = plan_all(out.plan, s, {});
  REQUIRE(lane.size() == 4);
  const auto audit = audit_trajectories(s, lane);
  INFO("worst pair " << audit.worst_pair << " slack " << audit.min_headway_slack);
  CHECK(audit.passes(1e-6, 0.1, 0.1));
  CHECK(audit.min_headway_slack >= -1e-6);
  CHECK(audit.max_dynamics_residual <= 1e-9);

  // Ego never closer to U than the headway.
  const VehicleTrajectory* ego = nullptr;
  for (const auto& vt : lane) {
    if (vt.ref.role == VehicleRole::ego) ego = &vt;
  }
  REQUIRE(ego != nullptr);
  const auto& tr = ego->trajectory;
  for (int k = 0; k <= tr.intervals(); ++k) {
    const auto u = predict_uncontrolled(s.uncontrolled, k * tr.dt);
    CHECK(u.position - tr.at(k).position >= required_gap(s.safety, tr.at(k).speed) - 1e-6);
  }

  std::stringstream ss;
  write_trajectories_csv(ss, lane);
  const auto back = read_trajectories_csv(ss);
  REQUIRE(back.size() == lane.size());
  for (std::size_t i = 0; i < lane.size(); ++i) {
    CHECK(back[i].ref == lane[i].ref);
    CHECK(back[i].source == lane[i].source);
    CHECK(back[i].trajectory.positions == lane[i].trajectory.positions);
    CHECK(back[i].trajectory.speeds == lane[i].trajectory.speeds);
    CHECK(back[i].trajectory.controls == lane[i].trajectory.controls);
    CHECK(back[i].trajectory.dt == doctest::Approx(lane[i].trajectory.dt).epsilon(1e-12));
  }
}

TEST_CASE("audit flags a headway violation") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {16.0, 20.0};
  s.cooperators = {{40.0, 30.0}, {28.0, 30.0}};
  std::vector<VehicleTrajectory> lane;
  lane.push_back({{VehicleRole::cooperator, 1}, "constant_speed", std::nullopt,
                  constant_speed_trajectory(s.cooperators[0], 0.1, 10)});
  lane.push_back({{VehicleRole::cooperator, 2}, "constant_speed", std::nullopt,
                  constant_speed_trajectory(s.cooperators[1], 0.1, 10)});
  const auto a = audit_trajectories(s, lane);
  CHECK(a.min_headway_slack < 0.0);
  CHECK_FALSE(a.passes(1e-6, 0.1, 0.1));
}
