#include "lanechange/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lanechange {

std::string to_string(VehicleRole role) {
  switch (role) {
    case VehicleRole::ego: return "ego";
    case VehicleRole::uncontrolled: return "uncontrolled";
    case VehicleRole::front: return "front";
    case VehicleRole::back: return "back";
    case VehicleRole::cooperator: return "cooperator";
  }
  return "unknown";
}

std::string to_string(const VehicleRef& ref) {
  if (ref.role == VehicleRole::cooperator) {
    return "cooperator " + std::to_string(ref.index);
  }
  return to_string(ref.role);
}

namespace {

bool gap_ok(double leader_x, double follower_x, double follower_v, const SafetyParams& s) {
  const double need = required_gap(s, follower_v);
  return leader_x - follower_x >= need - kGapRelTol * std::max(1.0, std::abs(need));
}

std::string describe_gap(double leader_x, double follower_x, double follower_v,
                         const SafetyParams& s) {
  std::ostringstream os;
  os << "gap " << (leader_x - follower_x) << " m < required " << required_gap(s, follower_v)
     << " m";
  return os.str();
}

}  // namespace

std::vector<Violation> validate_scenario(const Scenario& s) {
  std::vector<Violation> out;
  const auto& lim = s.limits;

  if (!(lim.u_min < 0.0 && lim.u_max > 0.0)) {
    out.push_back({"control_limits", {}, "require u_min < 0 < u_max"});
  }
  if (!(lim.v_min >= 0.0 && lim.v_min < lim.v_max)) {
    out.push_back({"speed_limits", {}, "require 0 <= v_min < v_max"});
  }
  if (!(s.safety.epsilon > 0.0 && s.safety.phi > 0.0)) {
    out.push_back({"safety_params", {}, "require epsilon > 0 and phi > 0"});
  }

  auto check_speed = [&](const VehicleState& st, VehicleRef ref) {
    if (!std::isfinite(st.position) || !std::isfinite(st.speed)) {
      out.push_back({"finite_state", {ref}, "non-finite position or speed"});
      return;
    }
    if (st.speed < lim.v_min || st.speed > lim.v_max) {
      std::ostringstream os;
      os << "speed " << st.speed << " m/s outside [" << lim.v_min << ", " << lim.v_max << "]";
      out.push_back({"speed_box", {ref}, os.str()});
    }
  };

  check_speed(s.ego, {VehicleRole::ego, 0});
  check_speed(s.uncontrolled, {VehicleRole::uncontrolled, 0});
  if (s.front) check_speed(*s.front, {VehicleRole::front, 0});
  if (s.back) check_speed(*s.back, {VehicleRole::back, 0});
  for (int i = 0; i < s.cooperator_count(); ++i) {
    check_speed(s.cooperators[i], {VehicleRole::cooperator, i + 1});
  }

  if (!gap_ok(s.uncontrolled.position, s.ego.position, s.ego.speed, s.safety)) {
    out.push_back({"headway",
                   {{VehicleRole::uncontrolled, 0}, {VehicleRole::ego, 0}},
                   describe_gap(s.uncontrolled.position, s.ego.position, s.ego.speed, s.safety)});
  }

  // Fast lane, front to back.
  std::vector<std::pair<VehicleState, VehicleRef>> lane;
  if (s.front) lane.push_back({*s.front, {VehicleRole::front, 0}});
  for (int i = 0; i < s.cooperator_count(); ++i) {
    lane.push_back({s.cooperators[i], {VehicleRole::cooperator, i + 1}});
  }
  if (s.back) lane.push_back({*s.back, {VehicleRole::back, 0}});
  for (std::size_t k = 0; k + 1 < lane.size(); ++k) {
    const auto& [lead, lead_ref] = lane[k];
    const auto& [foll, foll_ref] = lane[k + 1];
    if (!gap_ok(lead.position, foll.position, foll.speed, s.safety)) {
      out.push_back({"headway", {lead_ref, foll_ref},
                     describe_gap(lead.position, foll.position, foll.speed, s.safety)});
    }
  }
  return out;
}

VehicleState predict_uncontrolled(const VehicleState& initial, double t) {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("predict_uncontrolled: negative time");
  }
  return {initial.position + initial.speed * t, initial.speed};
}

}  // namespace lanechange
