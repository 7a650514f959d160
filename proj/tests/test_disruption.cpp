#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "lanechange/disruption.hpp"

using namespace lanechange;

TEST_CASE("weights for the reference vehicle") {
  const auto w = compute_weights(0.5, 10.0, 30.0, 23.0, ActuationLimits{});
  // Worst displacement scale (35 - 23) vs (23 - 5): 18 m/s over 10 s.
  CHECK(w.gamma_x == doctest::Approx(0.5 / (180.0 * 180.0)).epsilon(1e-14));
  CHECK(w.gamma_x == doctest::Approx(1.543e-5).epsilon(1e-3));
  CHECK(w.gamma_v == doctest::Approx(0.5 / 625.0).epsilon(1e-14));
  CHECK(w.gamma_v == doctest::Approx(8.0e-4));
}

TEST_CASE("gamma at the ends switches one term off") {
  CHECK(compute_weights(1.0, 10.0, 30.0, 23.0, {}).gamma_v == 0.0);
  CHECK(compute_weights(0.0, 10.0, 30.0, 23.0, {}).gamma_x == 0.0);
}

TEST_CASE("weights reject bad input") {
  CHECK_THROWS_AS(compute_weights(1.5, 10.0, 30.0, 23.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(compute_weights(0.5, 0.0, 30.0, 23.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(compute_weights(0.5, 10.0, 40.0, 23.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(compute_weights(0.5, 10.0, 30.0, 2.0, {}), std::invalid_argument);
}

TEST_CASE("total disruption on hand-computed states") {
  DisruptionWeights w;
  w.gamma_x = 2.0;
  w.gamma_v = 3.0;
  w.v_d = 25.0;
  CHECK(total_disruption({100.0, 25.0}, {205.0, 25.0}, 4.0, w) == doctest::Approx(2.0 * 25.0));
  w.v_d = 30.0;
  CHECK(total_disruption({0.0, 30.0}, {60.0, 28.0}, 2.0, w) == doctest::Approx(3.0 * 4.0));
  CHECK(total_disruption({10.0, 30.0}, {70.0, 30.0}, 2.0, w) == 0.0);
}

TEST_CASE("aggregate sums and picks the slot neighbours") {
  std::vector<VehicleDisruption> zero(3);
  auto r0 = aggregate(zero, 1);
  CHECK(r0.global == 0.0);
  CHECK(r0.pair == 0.0);

  std::vector<VehicleDisruption> two{{0, 0, 0.02}, {0, 0, 0.01}};
  auto r = aggregate(two, 1);
  CHECK(r.global == doctest::Approx(0.03));
  CHECK(r.pair == doctest::Approx(0.03));

  std::vector<VehicleDisruption> three{{0, 0, 0.02}, {0, 0, 0.01}, {0, 0, 0.005}};
  CHECK(aggregate(three, 0).pair == doctest::Approx(0.02));
  CHECK(aggregate(three, 3).pair == doctest::Approx(0.005));
  CHECK(aggregate(three, 3).global == doctest::Approx(0.035));
  CHECK_THROWS_AS(aggregate(three, 4), std::out_of_range);
  CHECK_THROWS_AS(aggregate(three, -1), std::out_of_range);
}

TEST_CASE("disruption properties on random states") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(-500.0, 500.0);
  std::uniform_real_distribution<double> v(5.0, 35.0);
  std::uniform_real_distribution<double> t(0.0, 20.0);
  const auto w = compute_weights(0.5, 10.0, 30.0, 23.0, {});
  for (int i = 0; i < 500; ++i) {
    const VehicleState a{x(rng), v(rng)};
    const VehicleState b{x(rng), v(rng)};
    const double tt = t(rng);
    const double d = total_disruption(a, b, tt, w);
    CHECK(d >= 0.0);
    // Common translation leaves D unchanged.
    const double off = x(rng);
    CHECK(total_disruption({a.position + off, a.speed}, {b.position + off, b.speed}, tt, w) ==
          doctest::Approx(d).epsilon(1e-9));
    // Zero exactly at the cruising point with speed v_d.
    CHECK(total_disruption(a, {a.position + a.speed * tt, w.v_d}, tt, w) == 0.0);

    // Convexity along a random segment in (x, v).
    const VehicleState c{x(rng), v(rng)};
    const double lam = 0.3;
    const VehicleState mid{lam * b.position + (1 - lam) * c.position,
                           lam * b.speed + (1 - lam) * c.speed};
    CHECK(total_disruption(a, mid, tt, w) <=
          lam * d + (1 - lam) * total_disruption(a, c, tt, w) + 1e-12);
  }
}

TEST_CASE("per-vehicle weights use each vehicle's own initial speed") {
  Scenario s;
  s.cooperators = {{100.0, 28.0}, {60.0, 31.0}};
  DisruptionSettings st;
  const auto w = cooperator_weights(st, s);
  REQUIRE(w.size() == 2);
  CHECK(w[0].gamma_x == doctest::Approx(0.5 / std::pow(23.0 * 10.0, 2)));
  CHECK(w[1].gamma_x == doctest::Approx(0.5 / std::pow(26.0 * 10.0, 2)));
  CHECK(w[0].gamma_v == w[1].gamma_v);
}
