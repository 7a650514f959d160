#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "equivalence.hpp"
#include "lanechange/reachability.hpp"
#include "lanechange/terminal_coordination.hpp"
#include "oracles.hpp"

using namespace lanechange;

namespace {

std::set<std::string> labels(const ConvexProblem& p) {
  std::set<std::string> out;
  for (const auto& c : p.constraints) out.insert(c.label);
  return out;
}

Scenario two_cooperators() {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {16.0, 20.0};
  s.front = VehicleState{70.0, 30.0};
  s.back = VehicleState{-60.0, 29.0};
  s.cooperators = {{25.0, 28.0}, {-15.0, 31.0}};
  return s;
}

oracle::Settings oracle_settings(const DisruptionSettings& d) {
  oracle::Settings st;
  st.gamma = d.gamma;
  st.t_avg = d.t_avg;
  st.v_d = d.v_d;
  st.gamma_t = d.gamma_t;
  return st;
}

}  // namespace

TEST_CASE("slot_to_binaries follows the slot definition") {
  CHECK(slot_to_binaries(1, 3) == std::vector<int>{0, 1, 1});
  CHECK(slot_to_binaries(0, 3) == std::vector<int>{1, 1, 1});
  CHECK(slot_to_binaries(3, 3) == std::vector<int>{0, 0, 0});
  CHECK(slot_to_binaries(0, 0).empty());
  CHECK_THROWS_AS(slot_to_binaries(-1, 3), std::out_of_range);
  CHECK_THROWS_AS(slot_to_binaries(4, 3), std::out_of_range);
  for (int m = 0; m <= 6; ++m) {
    for (int k = 0; k <= m; ++k) {
      const auto b = slot_to_binaries(k, m);
      CHECK(std::is_sorted(b.begin(), b.end()));
    }
  }
}

TEST_CASE("single cooperator, ego behind it: constraint set") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {20.0, 20.0};
  s.cooperators = {{30.0, 30.0}};
  const auto p = build_constraints(s, 1, 3.0, VehicleState{70.0, 25.0});
  CHECK(p.num_vars == 2);
  CHECK(labels(p) == std::set<std::string>{"order:1-C", "reach_upper:1", "reach_lower:1",
                                           "speed_max:1", "speed_min:1"});

  s.front = VehicleState{200.0, 30.0};
  s.back = VehicleState{-100.0, 30.0};
  const auto q = labels(build_constraints(s, 1, 3.0, VehicleState{70.0, 25.0}));
  CHECK(q.count("gap:F-1") == 1);
  CHECK(q.count("order:1-C") == 1);
  CHECK(q.count("gap:C-B") == 1);
  CHECK(q.count("order:C-1") == 0);
}

TEST_CASE("merging between cooperators 1 and 2 of three") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {20.0, 20.0};
  s.cooperators = {{40.0, 30.0}, {0.0, 30.0}, {-40.0, 30.0}};
  const auto l = labels(build_constraints(s, 1, 3.0, std::nullopt));
  for (const char* want : {"order:1-C", "order:C-2", "order:C-3", "gap:1-2", "gap:2-3", "gap:U-C",
                           "reach_upper:C", "reach_lower:C"}) {
    CHECK_MESSAGE(l.count(want) == 1, want);
  }
  CHECK(l.count("order:C-1") == 0);
  CHECK(l.count("order:2-C") == 0);
  CHECK_THROWS_AS(build_constraints(s, 1, 0.0, std::nullopt), std::invalid_argument);
}

TEST_CASE("big-M ordering rows with B_i = 1 leave only the ego-ahead half active") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {20.0, 20.0};
  s.cooperators = {{0.0, 30.0}};
  const std::vector<int> b{1};
  const auto p = build_big_m_constraints(s, b, 2.0, VehicleState{50.0, 25.0}, 1e5);
  Eigen::VectorXd z(2);
  z << 60.0, 30.0;  // cooperator ahead of the ego: violates "ego ahead of 1"
  for (const auto& c : p.constraints) {
    if (c.label == "order:C-1") CHECK(c.g.value(z) > 0.0);
    if (c.label == "order:1-C") CHECK(-c.g.value(z) * s.safety.epsilon > 0.99e5);
  }
}

TEST_CASE("enumerated slots match the big-M system on random points") {
  for (int m = 0; m <= 6; ++m) {
    const auto rep = equivalence::compare(m, 100, 17u + static_cast<unsigned>(m));
    CHECK(rep.mismatches == 0);
    CHECK(rep.checked > 0);
    if (m > 0) CHECK(rep.min_inactive_slack > 0.9e5);
  }
}

TEST_CASE("cruising cooperator gives a zero-disruption plan") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {30.0, 20.0};
  s.cooperators = {{100.0, 30.0}};
  const double t = 3.0;
  const VehicleState ego_end = predict_uncontrolled(s.ego, t);
  const auto out = solve_problem1(s, t, ego_end, {}, {});
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(out.plan.slot == 1);
  CHECK(out.plan.objective < 1e-9);
  CHECK(out.slots.at(0).status == ConvexStatus::infeasible);
  CHECK(verify_plan(s, out.plan, false).empty());
}

TEST_CASE("two cooperators straddling a cruising gap pick slot 1") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {30.0, 20.0};
  s.cooperators = {{200.0, 30.0}, {-100.0, 30.0}};
  const double t = 3.0;
  const auto out = solve_problem1(s, t, predict_uncontrolled(s.ego, t), {}, {});
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(out.plan.slot == 1);
  CHECK(out.plan.objective < 1e-9);
  CHECK(verify_plan(s, out.plan, false).empty());
}

TEST_CASE("no cooperators") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {30.0, 20.0};
  s.front = VehicleState{150.0, 30.0};
  s.back = VehicleState{-80.0, 30.0};
  const auto out = solve_problem1(s, 2.0, predict_uncontrolled(s.ego, 2.0), {}, {});
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(out.plan.slot == 0);
  CHECK(out.plan.cooperator_terminals.empty());
  CHECK(out.plan.objective == 0.0);
}

TEST_CASE("slot whose gap demand exceeds the reachable span is infeasible") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {30.0, 20.0};
  s.cooperators = {{50.0, 30.0}};
  const double t = 0.5;
  // Largest backward displacement of the cooperator relative to cruising is 0.875 m here.
  auto out = solve_problem1(s, t, predict_uncontrolled(s.ego, t), {}, {});
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(out.slots.at(0).status == ConvexStatus::infeasible);
  CHECK(out.plan.slot == 1);

  s.cooperators = {{5.0, 23.0}};
  out = solve_problem1(s, t, predict_uncontrolled(s.ego, t), {}, {});
  CHECK(out.status == CoordinationStatus::infeasible);
  for (const auto& r : out.slots) CHECK(r.status == ConvexStatus::infeasible);
}

TEST_CASE("unified problem: free merge costs only the time term") {
  Scenario s;
  s.ego = {0.0, 30.0};
  s.uncontrolled = {300.0, 30.0};
  s.cooperators = {{200.0, 30.0}, {-200.0, 30.0}};
  SolverConfig cfg;
  const DisruptionSettings d;
  const auto out = solve_unified_p2(s, d, cfg);
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(out.plan.t_f == doctest::Approx(cfg.t_lb));
  CHECK(out.plan.objective == doctest::Approx(d.gamma_t * cfg.t_lb).epsilon(1e-9));
  CHECK(verify_plan(s, out.plan, true).empty());
}

TEST_CASE("problem 1 agrees with exhaustive grid search on two cooperators") {
  const Scenario s = two_cooperators();
  REQUIRE(validate_scenario(s).empty());
  const DisruptionSettings d;
  for (double t : {2.0, 3.0}) {
    const VehicleState ego_end = tracking_endpoint(s.ego, d.v_d, t, s.limits);
    const auto out = solve_problem1(s, t, ego_end, d, {});
    REQUIRE(out.status == CoordinationStatus::feasible);
    CHECK(verify_plan(s, out.plan, false).empty());
    // Objective dominance over every optimal slot.
    for (const auto& r : out.slots) {
      if (r.status == ConvexStatus::optimal) CHECK(out.plan.objective <= r.objective + 1e-12);
    }
    const double bf = oracle::problem1(s, t, ego_end, oracle_settings(d), 2.0 * out.plan.objective + 1e-6);
    INFO("t = " << t << " solver " << out.plan.objective << " oracle " << bf);
    REQUIRE(std::isfinite(bf));
    CHECK(out.plan.objective <= bf * 1.05 + 1e-9);
    CHECK(bf <= out.plan.objective * 1.05 + 1e-9);
  }
}

TEST_CASE("unified problem agrees with exhaustive search on one cooperator") {
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {16.0, 20.0};
  s.front = VehicleState{60.0, 29.0};
  s.back = VehicleState{-50.0, 30.0};
  s.cooperators = {{3.0, 27.0}};
  REQUIRE(validate_scenario(s).empty());
  const DisruptionSettings d;
  const SolverConfig cfg;
  const auto out = solve_unified_p2(s, d, cfg);
  REQUIRE(out.status == CoordinationStatus::feasible);
  CHECK(verify_plan(s, out.plan, true).empty());
  const double bf = oracle::problem2(s, oracle_settings(d), cfg.t_lb, cfg.t_max, 0.25,
                                     2.0 * out.plan.objective + 1e-6);
  INFO("solver " << out.plan.objective << " at t_f " << out.plan.t_f << " oracle " << bf);
  REQUIRE(std::isfinite(bf));
  CHECK(out.plan.objective <= bf * 1.05);
  CHECK(bf <= out.plan.objective * 1.05);
}

TEST_CASE("a longer horizon never worsens the unified optimum on the shared grid") {
  const Scenario s = two_cooperators();
  const DisruptionSettings d;
  SolverConfig cfg;
  // Grid spacing 0.5 s in both cases so the shorter grid is a prefix of the longer one.
  cfg.t_max = 10.0;
  cfg.grid_points = 20;
  const auto short_run = solve_unified_p2(s, d, cfg);
  cfg.t_max = 20.0;
  cfg.grid_points = 40;
  const auto long_run = solve_unified_p2(s, d, cfg);
  REQUIRE(short_run.status == CoordinationStatus::feasible);
  REQUIRE(long_run.status == CoordinationStatus::feasible);
  CHECK(long_run.plan.objective <= short_run.plan.objective + 1e-9);
}

TEST_CASE("verify_plan reports broken gaps and unreachable states") {
  const Scenario s = two_cooperators();
  const double t = 3.0;
  const auto out = solve_problem1(s, t, tracking_endpoint(s.ego, 30.0, t, s.limits), {}, {});
  REQUIRE(out.status == CoordinationStatus::feasible);
  TerminalPlan bad = out.plan;
  bad.cooperator_terminals[0].position += 1000.0;
  CHECK_FALSE(verify_plan(s, bad, false).empty());
  bad = out.plan;
  bad.slot = out.plan.slot == 0 ? 2 : 0;
  CHECK_FALSE(verify_plan(s, bad, false).empty());
}
