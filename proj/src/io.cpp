#include "lanechange/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace lanechange {

InputError::InputError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
      line_(line) {}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

// Map reader that rejects unknown keys and reports positions.
class Section {
 public:
  Section(const YAML::Node& node, std::string source, std::string path)
      : node_(node), source_(std::move(source)), path_(std::move(path)) {
    if (!node_.IsMap()) fail(node_, "expected a mapping");
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    throw InputError(source_, line_of(at), (path_.empty() ? "" : path_ + ": ") + msg);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return static_cast<bool>(node_[key]);
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_[key];
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const YAML::Node n = node_[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw InputError(source_, line_of(n), qualified(key) + ": cannot convert '" + scalar(n) + "'");
    }
  }

  template <typename T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!node_[key]) fail(node_, "missing key '" + key + "'");
    T out{};
    read(key, out);
    return out;
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    return Section(node_[key], source_, qualified(key));
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw InputError(source_, line_of(kv.first), "unknown key '" + qualified(key) + "'");
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& source() const { return source_; }

 private:
  static std::string scalar(const YAML::Node& n) { return n.IsScalar() ? n.Scalar() : "<non-scalar>"; }

  YAML::Node node_;
  std::string source_;
  std::string path_;
  std::set<std::string> seen_;
};

YAML::Node load_yaml(const std::string& text, const std::string& source) {
  try {
    YAML::Node root = YAML::Load(text);
    if (!root || root.IsNull()) throw InputError(source, 0, "empty document");
    return root;
  } catch (const YAML::ParserException& e) {
    throw InputError(source, e.mark.line + 1, e.msg);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

VehicleState read_vehicle(Section s) {
  VehicleState v;
  v.position = s.required<double>("position_m");
  v.speed = s.required<double>("speed_mps");
  s.finish();
  return v;
}

void read_limits(Section s, ActuationLimits& l) {
  s.read("u_min_mps2", l.u_min);
  s.read("u_max_mps2", l.u_max);
  s.read("v_min_mps", l.v_min);
  s.read("v_max_mps", l.v_max);
  s.finish();
}

void read_safety(Section s, SafetyParams& p) {
  s.read("epsilon_m", p.epsilon);
  s.read("phi_s", p.phi);
  s.finish();
}

int vehicle_line(const Violation& v, const YAML::Node& root) {
  if (v.vehicles.empty()) return 0;
  const VehicleRef& r = v.vehicles.front();
  switch (r.role) {
    case VehicleRole::ego: return line_of(root["ego"]);
    case VehicleRole::uncontrolled: return line_of(root["uncontrolled"]);
    case VehicleRole::front: return line_of(root["front"]);
    case VehicleRole::back: return line_of(root["back"]);
    case VehicleRole::cooperator: {
      const YAML::Node list = root["cooperators"];
      if (list && list.IsSequence() && r.index >= 1 && static_cast<std::size_t>(r.index) <= list.size()) {
        return line_of(list[static_cast<std::size_t>(r.index - 1)]);
      }
      return line_of(list);
    }
  }
  return 0;
}

void emit_vehicle(YAML::Emitter& out, const VehicleState& v) {
  out << YAML::Flow << YAML::BeginMap << YAML::Key << "position_m" << YAML::Value << v.position << YAML::Key
      << "speed_mps" << YAML::Value << v.speed << YAML::EndMap;
}

void emit_limits(YAML::Emitter& out, const ActuationLimits& l) {
  out << YAML::Key << "limits" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "u_min_mps2" << YAML::Value << l.u_min;
  out << YAML::Key << "u_max_mps2" << YAML::Value << l.u_max;
  out << YAML::Key << "v_min_mps" << YAML::Value << l.v_min;
  out << YAML::Key << "v_max_mps" << YAML::Value << l.v_max;
  out << YAML::EndMap;
}

void emit_safety(YAML::Emitter& out, const SafetyParams& p) {
  out << YAML::Key << "safety" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epsilon_m" << YAML::Value << p.epsilon;
  out << YAML::Key << "phi_s" << YAML::Value << p.phi;
  out << YAML::EndMap;
}

}  // namespace

ScenarioFile parse_scenario(const std::string& text, const std::string& source) {
  const YAML::Node root = load_yaml(text, source);
  Section s(root, source, "");
  ScenarioFile f;
  s.read("desired_speed_mps", f.v_d);
  if (s.has("limits")) read_limits(s.sub("limits"), f.scenario.limits);
  if (s.has("safety")) read_safety(s.sub("safety"), f.scenario.safety);
  if (!s.has("ego")) s.fail(root, "missing key 'ego'");
  f.scenario.ego = read_vehicle(s.sub("ego"));
  if (!s.has("uncontrolled")) s.fail(root, "missing key 'uncontrolled'");
  f.scenario.uncontrolled = read_vehicle(s.sub("uncontrolled"));
  if (s.has("front")) f.scenario.front = read_vehicle(s.sub("front"));
  if (s.has("back")) f.scenario.back = read_vehicle(s.sub("back"));
  if (s.has("cooperators")) {
    const YAML::Node list = s.child("cooperators");
    if (!list.IsSequence()) s.fail(list, "cooperators: expected a sequence");
    for (std::size_t i = 0; i < list.size(); ++i) {
      f.scenario.cooperators.push_back(read_vehicle(Section(list[i], source, "cooperators[" + std::to_string(i + 1) + "]")));
    }
  }
  s.finish();
  const auto violations = validate_scenario(f.scenario);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    std::string who;
    for (const auto& r : v.vehicles) who += (who.empty() ? "" : ", ") + to_string(r);
    throw InputError(source, vehicle_line(v, root),
                     v.constraint + (who.empty() ? "" : " (" + who + ")") + ": " + v.message);
  }
  if (!(f.v_d >= f.scenario.limits.v_min && f.v_d <= f.scenario.limits.v_max)) {
    throw InputError(source, line_of(root["desired_speed_mps"]), "desired_speed_mps outside the speed limits");
  }
  return f;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.string());
}

void write_scenario(std::ostream& os, const ScenarioFile& f) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "desired_speed_mps" << YAML::Value << f.v_d;
  emit_limits(out, f.scenario.limits);
  emit_safety(out, f.scenario.safety);
  out << YAML::Key << "ego" << YAML::Value;
  emit_vehicle(out, f.scenario.ego);
  out << YAML::Key << "uncontrolled" << YAML::Value;
  emit_vehicle(out, f.scenario.uncontrolled);
  if (f.scenario.front) {
    out << YAML::Key << "front" << YAML::Value;
    emit_vehicle(out, *f.scenario.front);
  }
  if (f.scenario.back) {
    out << YAML::Key << "back" << YAML::Value;
    emit_vehicle(out, *f.scenario.back);
  }
  out << YAML::Key << "cooperators" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : f.scenario.cooperators) emit_vehicle(out, c);
  out << YAML::EndSeq << YAML::EndMap;
  os << out.c_str() << '\n';
}

ExperimentConfig parse_experiment(const std::string& text, const std::string& source) {
  const YAML::Node root = load_yaml(text, source);
  Section s(root, source, "");
  ExperimentConfig c;
  auto check = [&source](const YAML::Node& at, const std::string& section, auto&& validate) {
    try {
      validate();
    } catch (const std::invalid_argument& e) {
      std::string msg = e.what();
      if (msg.rfind(section + ":", 0) != 0) msg = section + ": " + msg;
      throw InputError(source, line_of(at), msg);
    }
  };

  if (s.has("seeds")) {
    const YAML::Node n = s.child("seeds");
    if (n.IsSequence()) {
      for (const auto& e : n) {
        try {
          c.seeds.push_back(e.as<std::uint64_t>());
        } catch (const YAML::Exception&) {
          throw InputError(source, line_of(e), "seeds: expected a non-negative integer");
        }
      }
    } else {
      Section r(n, source, "seeds");
      const auto first = r.required<std::uint64_t>("first");
      const auto count = r.required<int>("count");
      r.finish();
      if (count < 0) r.fail(n, "count must be non-negative");
      for (int i = 0; i < count; ++i) c.seeds.push_back(first + static_cast<std::uint64_t>(i));
    }
  }
  if (s.has("cooperator_counts")) {
    const YAML::Node n = s.child("cooperator_counts");
    if (!n.IsSequence()) s.fail(n, "cooperator_counts: expected a sequence");
    for (const auto& e : n) {
      int m = 0;
      try {
        m = e.as<int>();
      } catch (const YAML::Exception&) {
        throw InputError(source, line_of(e), "cooperator_counts: expected an integer");
      }
      if (m < 1) throw InputError(source, line_of(e), "cooperator_counts: must be at least 1");
      c.cooperator_counts.push_back(m);
    }
  }
  if (s.has("methods")) {
    const YAML::Node n = s.child("methods");
    if (!n.IsSequence()) s.fail(n, "methods: expected a sequence");
    for (const auto& e : n) {
      try {
        c.methods.push_back(method_from_string(e.as<std::string>()));
      } catch (const std::exception& ex) {
        throw InputError(source, line_of(e), std::string("methods: ") + ex.what());
      }
    }
  }
  if (s.has("generator")) {
    Section g = s.sub("generator");
    auto& gc = c.generator;
    g.read("ego_speed_mps", gc.ego_speed);
    g.read("uncontrolled_speed_mps", gc.uncontrolled_speed);
    g.read("u_extra_gap_min_m", gc.u_extra_gap_min);
    g.read("u_extra_gap_max_m", gc.u_extra_gap_max);
    g.read("v_d_min_mps", gc.v_d_min);
    g.read("v_d_max_mps", gc.v_d_max);
    g.read("speed_jitter_mps", gc.speed_jitter);
    g.read("spacing_jitter_m", gc.spacing_jitter);
    g.read("sort_speeds", gc.sort_speeds);
    g.read("closure_horizon_s", gc.closure_horizon);
    g.read("platoon_offset_min_m", gc.platoon_offset_min);
    g.read("platoon_offset_max_m", gc.platoon_offset_max);
    g.read("max_attempts", gc.max_attempts);
    g.finish();
    check(s.child("generator"), "generator", [&] { gc.validate(); });
  }
  if (s.has("limits")) read_limits(s.sub("limits"), c.generator.limits);
  if (s.has("safety")) read_safety(s.sub("safety"), c.generator.safety);
  if (s.has("disruption")) {
    Section d = s.sub("disruption");
    d.read("gamma", c.disruption.gamma);
    d.read("t_avg_s", c.disruption.t_avg);
    d.read("gamma_t_per_s", c.disruption.gamma_t);
    d.finish();
  }
  if (s.has("solver")) {
    Section d = s.sub("solver");
    d.read("t_lb_s", c.solver.t_lb);
    d.read("t_max_s", c.solver.t_max);
    d.read("grid_points", c.solver.grid_points);
    d.read("golden_tol_s", c.solver.golden_tol);
    d.read("golden_iterations", c.solver.golden_iterations);
    d.read("verify_tol", c.solver.verify_tol);
    d.finish();
    check(s.child("solver"), "solver", [&] {
      if (!(c.solver.t_lb > 0.0 && c.solver.t_max > c.solver.t_lb)) {
        throw std::invalid_argument("need 0 < t_lb_s < t_max_s");
      }
    });
  }
  if (s.has("planner")) {
    Section d = s.sub("planner");
    d.read("intervals", c.planner.intervals);
    d.read("delta_x_m2", c.planner.delta_x);
    d.read("delta_v_m2ps2", c.planner.delta_v);
    d.read("stationarity_tol", c.planner.stationarity_tol);
    d.finish();
    check(s.child("planner"), "planner", [&] {
      if (c.planner.intervals < 10) throw std::invalid_argument("intervals must be at least 10");
    });
  }
  if (s.has("baseline")) {
    Section d = s.sub("baseline");
    d.read("alpha", c.baseline.alpha);
    d.read("d_th", c.baseline.d_th);
    d.read("lambda", c.baseline.lambda);
    d.read("max_iters", c.baseline.max_iters);
    d.read("speed_tolerance_mps", c.baseline.speed_tolerance);
    d.read("terminal_cost_weight_s2pm2", c.baseline.terminal_cost_weight);
    d.finish();
    check(s.child("baseline"), "baseline", [&] { c.baseline.validate(); });
  }
  if (s.has("idm")) {
    Section d = s.sub("idm");
    if (d.has("desired_speed_mps")) {
      d.read("desired_speed_mps", c.baseline.idm.desired_speed);
      c.idm_speed_from_v_d = false;
    }
    d.read("max_accel_mps2", c.baseline.idm.max_accel);
    d.read("comfortable_decel_mps2", c.baseline.idm.comfortable_decel);
    d.read("accel_exponent", c.baseline.idm.accel_exponent);
    d.read("min_gap_m", c.baseline.idm.min_gap);
    d.read("time_headway_s", c.baseline.idm.time_headway);
    d.finish();
    check(s.child("idm"), "idm", [&] { c.baseline.validate(); });
  }
  if (s.has("output")) {
    Section d = s.sub("output");
    d.read("write_trajectories", c.write_trajectories);
    d.finish();
  }
  s.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(source, 0, e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_file(path), path.string());
}

void write_experiment(std::ostream& os, const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;
  out << YAML::Key << "cooperator_counts" << YAML::Value << YAML::Flow << c.cooperator_counts;
  out << YAML::Key << "methods" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Method m : c.methods) out << to_string(m);
  out << YAML::EndSeq;
  const auto& g = c.generator;
  out << YAML::Key << "generator" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "ego_speed_mps" << YAML::Value << g.ego_speed;
  out << YAML::Key << "uncontrolled_speed_mps" << YAML::Value << g.uncontrolled_speed;
  out << YAML::Key << "u_extra_gap_min_m" << YAML::Value << g.u_extra_gap_min;
  out << YAML::Key << "u_extra_gap_max_m" << YAML::Value << g.u_extra_gap_max;
  out << YAML::Key << "v_d_min_mps" << YAML::Value << g.v_d_min;
  out << YAML::Key << "v_d_max_mps" << YAML::Value << g.v_d_max;
  out << YAML::Key << "speed_jitter_mps" << YAML::Value << g.speed_jitter;
  out << YAML::Key << "spacing_jitter_m" << YAML::Value << g.spacing_jitter;
  out << YAML::Key << "sort_speeds" << YAML::Value << g.sort_speeds;
  out << YAML::Key << "closure_horizon_s" << YAML::Value << g.closure_horizon;
  out << YAML::Key << "platoon_offset_min_m" << YAML::Value << g.platoon_offset_min;
  out << YAML::Key << "platoon_offset_max_m" << YAML::Value << g.platoon_offset_max;
  out << YAML::Key << "max_attempts" << YAML::Value << g.max_attempts;
  out << YAML::EndMap;
  emit_limits(out, g.limits);
  emit_safety(out, g.safety);
  out << YAML::Key << "disruption" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "gamma" << YAML::Value << c.disruption.gamma;
  out << YAML::Key << "t_avg_s" << YAML::Value << c.disruption.t_avg;
  out << YAML::Key << "gamma_t_per_s" << YAML::Value << c.disruption.gamma_t;
  out << YAML::EndMap;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t_lb_s" << YAML::Value << c.solver.t_lb;
  out << YAML::Key << "t_max_s" << YAML::Value << c.solver.t_max;
  out << YAML::Key << "grid_points" << YAML::Value << c.solver.grid_points;
  out << YAML::Key << "golden_tol_s" << YAML::Value << c.solver.golden_tol;
  out << YAML::Key << "golden_iterations" << YAML::Value << c.solver.golden_iterations;
  out << YAML::Key << "verify_tol" << YAML::Value << c.solver.verify_tol;
  out << YAML::EndMap;
  out << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "intervals" << YAML::Value << c.planner.intervals;
  out << YAML::Key << "delta_x_m2" << YAML::Value << c.planner.delta_x;
  out << YAML::Key << "delta_v_m2ps2" << YAML::Value << c.planner.delta_v;
  out << YAML::Key << "stationarity_tol" << YAML::Value << c.planner.stationarity_tol;
  out << YAML::EndMap;
  const auto& b = c.baseline;
  out << YAML::Key << "baseline" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "alpha" << YAML::Value << b.alpha;
  out << YAML::Key << "d_th" << YAML::Value << b.d_th;
  out << YAML::Key << "lambda" << YAML::Value << b.lambda;
  out << YAML::Key << "max_iters" << YAML::Value << b.max_iters;
  out << YAML::Key << "speed_tolerance_mps" << YAML::Value << b.speed_tolerance;
  out << YAML::Key << "terminal_cost_weight_s2pm2" << YAML::Value << b.terminal_cost_weight;
  out << YAML::EndMap;
  out << YAML::Key << "idm" << YAML::Value << YAML::BeginMap;
  if (!c.idm_speed_from_v_d) out << YAML::Key << "desired_speed_mps" << YAML::Value << b.idm.desired_speed;
  out << YAML::Key << "max_accel_mps2" << YAML::Value << b.idm.max_accel;
  out << YAML::Key << "comfortable_decel_mps2" << YAML::Value << b.idm.comfortable_decel;
  out << YAML::Key << "accel_exponent" << YAML::Value << b.idm.accel_exponent;
  out << YAML::Key << "min_gap_m" << YAML::Value << b.idm.min_gap;
  out << YAML::Key << "time_headway_s" << YAML::Value << b.idm.time_headway;
  out << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "write_trajectories" << YAML::Value << c.write_trajectories;
  out << YAML::EndMap;
  out << YAML::EndMap;
  os << out.c_str() << '\n';
}

}  // namespace lanechange
