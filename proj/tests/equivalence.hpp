#pragma once

#include <map>
#include <random>
#include <string>

#include "lanechange/terminal_coordination.hpp"

namespace equivalence {

struct Report {
  long checked = 0;
  long mismatches = 0;
  double min_inactive_slack = 1e300;  // m, over big-M rows absent from the enumeration
};

// Compares the enumerated slot system with the big-M system at random evaluation points:
// shared rows must agree in value and activity, the extra big-M rows must be slack.
inline Report compare(int m, int points, unsigned seed, double big_m = 1e5) {
  using namespace lanechange;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-300.0, 300.0);
  std::uniform_real_distribution<double> spd(5.0, 35.0);
  Scenario s;
  s.ego = {0.0, 23.0};
  s.uncontrolled = {20.0, 20.0};
  s.front = VehicleState{400.0, 30.0};
  s.back = VehicleState{-400.0, 30.0};
  for (int i = 0; i < m; ++i) s.cooperators.push_back({200.0 - 40.0 * i, 30.0});
  const double t_f = 3.0;
  Report rep;
  for (int k = 0; k <= m; ++k) {
    const auto enumerated = build_constraints(s, k, t_f, std::nullopt);
    const auto relaxed = build_big_m_constraints(s, slot_to_binaries(k, m), t_f, std::nullopt, big_m);
    std::map<std::string, const ConvexConstraint*> by_label;
    for (const auto& c : enumerated.constraints) by_label[c.label] = &c;
    for (int p = 0; p < points; ++p) {
      Eigen::VectorXd z(enumerated.num_vars);
      for (int j = 0; j < z.size(); ++j) z[j] = (j % 2 == 0) ? pos(rng) : spd(rng);
      std::size_t matched = 0;
      for (const auto& c : relaxed.constraints) {
        ++rep.checked;
        const double g = c.g.value(z);
        auto it = by_label.find(c.label);
        if (it != by_label.end()) {
          ++matched;
          const double ge = it->second->g.value(z);
          if ((g <= 0.0) != (ge <= 0.0) || std::abs(g - ge) > 1e-9 * std::max(1.0, std::abs(ge))) {
            ++rep.mismatches;
          }
        } else {
          // Gap rows are scaled by 1/epsilon; report the slack in metres.
          const double slack = -g * s.safety.epsilon;
          rep.min_inactive_slack = std::min(rep.min_inactive_slack, slack);
          if (g > 0.0) ++rep.mismatches;
        }
      }
      if (matched != enumerated.constraints.size()) ++rep.mismatches;
    }
  }
  return rep;
}

}  // namespace equivalence
