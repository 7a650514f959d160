#include "lanechange/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace lanechange {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::baseline_position: return "baseline-position";
    case Method::baseline_full: return "baseline-full";
    case Method::pa1: return "pa1";
    case Method::pa2: return "pa2";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected baseline-position, baseline-full, pa1 or pa2)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> all{Method::baseline_position, Method::baseline_full, Method::pa1,
                                       Method::pa2};
  return all;
}

void GeneratorConfig::validate() const {
  if (!(u_extra_gap_min >= 0.0 && u_extra_gap_max >= u_extra_gap_min)) {
    throw std::invalid_argument("generator: need 0 <= u_extra_gap_min <= u_extra_gap_max");
  }
  if (!(v_d_min <= v_d_max)) throw std::invalid_argument("generator: v_d_min exceeds v_d_max");
  if (!(speed_jitter >= 0.0 && spacing_jitter >= 0.0 && closure_horizon >= 0.0)) {
    throw std::invalid_argument("generator: jitters and closure horizon must be non-negative");
  }
  if (!(platoon_offset_min <= platoon_offset_max)) {
    throw std::invalid_argument("generator: platoon_offset_min exceeds platoon_offset_max");
  }
  if (max_attempts < 1) throw std::invalid_argument("generator: max_attempts must be at least 1");
}

GeneratedScenario generate_scenario(std::uint64_t seed, int m, const GeneratorConfig& cfg) {
  if (m < 0) throw std::invalid_argument("generate_scenario: negative cooperator count");
  cfg.validate();
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(attempt)};
    std::mt19937_64 rng(seq);
    auto uniform = [&rng](double lo, double hi) {
      return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    GeneratedScenario out;
    out.attempts = attempt + 1;
    Scenario& s = out.scenario;
    s.limits = cfg.limits;
    s.safety = cfg.safety;
    out.v_d = uniform(cfg.v_d_min, cfg.v_d_max);
    s.ego = {0.0, cfg.ego_speed};
    s.uncontrolled = {required_gap(s.safety, cfg.ego_speed) + uniform(cfg.u_extra_gap_min, cfg.u_extra_gap_max),
                      cfg.uncontrolled_speed};
    std::vector<double> speeds(static_cast<std::size_t>(m));
    for (auto& v : speeds) {
      v = std::clamp(out.v_d + uniform(-cfg.speed_jitter, cfg.speed_jitter), cfg.limits.v_min, cfg.limits.v_max);
    }
    if (cfg.sort_speeds) std::sort(speeds.begin(), speeds.end(), std::greater<>());
    std::vector<double> pos(static_cast<std::size_t>(m), 0.0);
    for (std::size_t i = 1; i < pos.size(); ++i) {
      const double closing = std::max(0.0, speeds[i] - speeds[i - 1]) * cfg.closure_horizon;
      pos[i] = pos[i - 1] - required_gap(s.safety, speeds[i]) - closing - uniform(0.0, cfg.spacing_jitter);
    }
    const double mid = m > 0 ? 0.5 * (pos.front() + pos.back()) : 0.0;
    const double shift = uniform(cfg.platoon_offset_min, cfg.platoon_offset_max) - mid;
    for (std::size_t i = 0; i < pos.size(); ++i) s.cooperators.push_back({pos[i] + shift, speeds[i]});
    if (validate_scenario(s).empty()) return out;
  }
  throw std::runtime_error("generate_scenario: no valid scenario for seed " + std::to_string(seed) +
                           ", m = " + std::to_string(m));
}

void ExperimentConfig::validate() const {
  for (int m : cooperator_counts) {
    if (m < 1) throw std::invalid_argument("experiment: cooperator counts must be at least 1");
  }
  generator.validate();
  baseline.validate();
  if (planner.intervals < 10) throw std::invalid_argument("experiment: planner needs at least 10 intervals");
  if (!(solver.t_lb > 0.0 && solver.t_max > solver.t_lb)) {
    throw std::invalid_argument("experiment: need 0 < t_lb < t_max");
  }
}

std::string MethodReport::run_id() const {
  return "m" + std::to_string(m) + "_seed" + std::to_string(seed) + "_" + to_string(method);
}

DisruptionReport score_terminals(const Scenario& s, double v_d, double t_f, int slot,
                                 const std::vector<VehicleState>& terminals,
                                 const DisruptionSettings& settings) {
  DisruptionSettings st = settings;
  st.v_d = v_d;
  const auto w = cooperator_weights(st, s);
  return evaluate_disruption(s.cooperators, terminals, t_f, w, slot);
}

MethodReport run_method(const Scenario& s, double v_d, Method method, const ExperimentConfig& cfg) {
  MethodReport rep;
  rep.method = method;
  rep.m = s.cooperator_count();
  rep.v_d = v_d;
  DisruptionSettings settings = cfg.disruption;
  settings.v_d = v_d;
  auto average_time = [&rep] {
    double total = 0.0;
    for (const auto& it : rep.iterations) total += it.seconds;
    rep.t_iter_avg = rep.iterations.empty() ? 0.0 : total / static_cast<double>(rep.iterations.size());
  };
  try {
    if (method == Method::pa2) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto out = solve_unified_p2(s, settings, cfg.solver, [&](const TerminalPlan& p) {
        return plannable(p, s, cfg.planner);
      });
      const double secs = seconds_since(t0);
      rep.n_iter = 1;
      rep.iterations.push_back({out.plan.t_f, secs, out.status == CoordinationStatus::feasible,
                                out.status == CoordinationStatus::feasible ? "" : to_string(out.status)});
      if (out.status != CoordinationStatus::feasible) {
        rep.failure = "unified problem " + to_string(out.status);
        average_time();
        return rep;
      }
      rep.t_f_star = rep.t_f_initial = out.plan.t_f;
      rep.trajectories = plan_all(out.plan, s, cfg.planner);
    } else {
      BaselineConfig bc = method == Method::baseline_position ? BaselineConfig::position_only()
                                                              : BaselineConfig::full_disruption();
      const BaselineConfig& base = cfg.baseline;
      bc.alpha = base.alpha;
      bc.d_th = base.d_th;
      bc.lambda = base.lambda;
      bc.max_iters = base.max_iters;
      bc.speed_tolerance = base.speed_tolerance;
      bc.terminal_cost_weight = base.terminal_cost_weight;
      bc.idm = base.idm;
      if (cfg.idm_speed_from_v_d) bc.idm.desired_speed = v_d;
      const auto mode = method == Method::pa1 ? IterativeMode::pa1 : IterativeMode::baseline;
      auto r = run_iterative(s, settings, bc, mode, cfg.solver, cfg.planner);
      rep.iterations = std::move(r.iterations);
      rep.n_iter = r.n_iter;
      rep.t_f_initial = r.t_f_star;
      if (!r.feasible) {
        rep.failure = r.failure;
        average_time();
        return rep;
      }
      rep.t_f_star = r.plan.t_f;
      rep.trajectories = std::move(r.trajectories);
    }
  } catch (const std::exception& e) {
    rep.failure = e.what();
    rep.trajectories.clear();
    average_time();
    return rep;
  }
  average_time();

  int slot = 0;
  bool ego_seen = false;
  for (const auto& vt : rep.trajectories) {
    if (vt.ref.role == VehicleRole::ego) {
      ego_seen = true;
    } else if (vt.ref.role == VehicleRole::cooperator) {
      rep.cooperator_terminals.push_back(vt.trajectory.terminal());
      if (!ego_seen) ++slot;
    }
  }
  rep.slot = slot;
  const auto scored = score_terminals(s, v_d, rep.t_f_star, slot, rep.cooperator_terminals, cfg.disruption);
  rep.pair_disruption = scored.pair;
  rep.global_disruption = scored.global;
  rep.audit = audit_trajectories(s, rep.trajectories);
  rep.audit_passed = rep.audit->passes(1e-6, cfg.planner.delta_x, cfg.planner.delta_v);
  rep.feasible = true;
  return rep;
}

int default_thread_count() {
  if (const char* env = std::getenv("LANECHANGE_THREADS")) {
    int n = 0;
    const std::string s(env);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), n);
    if (r.ec == std::errc() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<AggregateRow> aggregate_reports(const std::vector<MethodReport>& reports) {
  std::map<std::pair<int, int>, AggregateRow> rows;
  for (const auto& r : reports) {
    auto& row = rows[{r.m, static_cast<int>(r.method)}];
    row.m = r.m;
    row.method = r.method;
    ++row.runs;
    if (!r.feasible) continue;
    ++row.feasible;
    row.t_f_star += r.t_f_star;
    row.pair_disruption += r.pair_disruption;
    row.global_disruption += r.global_disruption;
    row.n_iter += r.n_iter;
    row.t_iter_avg += r.t_iter_avg;
  }
  std::vector<AggregateRow> out;
  for (auto& [key, row] : rows) {
    const double n = row.feasible > 0 ? row.feasible : std::numeric_limits<double>::quiet_NaN();
    row.t_f_star /= n;
    row.pair_disruption /= n;
    row.global_disruption /= n;
    row.n_iter /= n;
    row.t_iter_avg /= n;
    out.push_back(row);
  }
  return out;
}

SuiteResult run_suite(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  SuiteResult suite;
  suite.threads = threads > 0 ? threads : default_thread_count();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<int> counts = cfg.cooperator_counts;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<Method> methods = cfg.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());

  struct Cell {
    int m;
    std::uint64_t seed;
    Method method;
  };
  std::vector<Cell> cells;
  for (int m : counts) {
    for (auto seed : seeds) {
      for (Method method : methods) cells.push_back({m, seed, method});
    }
  }
  suite.reports.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      MethodReport rep;
      try {
        const auto gen = generate_scenario(c.seed, c.m, cfg.generator);
        rep = run_method(gen.scenario, gen.v_d, c.method, cfg);
      } catch (const std::exception& e) {
        rep.failure = e.what();
      }
      rep.seed = c.seed;
      rep.m = c.m;
      rep.method = c.method;
      suite.reports[i] = std::move(rep);
    }
  };
  const int n = std::min<int>(suite.threads, static_cast<int>(std::max<std::size_t>(1, cells.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  suite.table = aggregate_reports(suite.reports);
  suite.wall_seconds = seconds_since(t0);
  return suite;
}

void write_results_csv(std::ostream& os, const std::vector<AggregateRow>& table) {
  os << "|S|,method,t_f_star,pair_disruption,global_disruption,n_iter,t_iter_avg,runs,feasible\n";
  for (const auto& r : table) {
    os << r.m << ',' << to_string(r.method) << ',' << num(r.t_f_star) << ',' << num(r.pair_disruption) << ','
       << num(r.global_disruption) << ',' << num(r.n_iter) << ',' << num(r.t_iter_avg) << ',' << r.runs << ','
       << r.feasible << '\n';
  }
}

std::vector<AggregateRow> read_results_csv(std::istream& is) {
  std::vector<AggregateRow> out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("results.csv: missing header");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw std::runtime_error("results.csv:" + std::to_string(lineno) + ": expected 9 fields");
    AggregateRow r;
    try {
      r.m = std::stoi(f[0]);
      r.method = method_from_string(f[1]);
      r.t_f_star = std::stod(f[2]);
      r.pair_disruption = std::stod(f[3]);
      r.global_disruption = std::stod(f[4]);
      r.n_iter = std::stod(f[5]);
      r.t_iter_avg = std::stod(f[6]);
      r.runs = std::stoi(f[7]);
      r.feasible = std::stoi(f[8]);
    } catch (const std::exception& e) {
      throw std::runtime_error("results.csv:" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(r);
  }
  return out;
}

void write_runs_csv(std::ostream& os, const std::vector<MethodReport>& reports) {
  os << "run_id,|S|,seed,method,v_d,feasible,t_f_star,t_f_initial,slot,pair_disruption,global_disruption,"
        "n_iter,t_iter_avg,audit_passed,min_headway_slack,failure\n";
  for (const auto& r : reports) {
    std::string failure = r.failure;
    std::replace(failure.begin(), failure.end(), ',', ';');
    std::replace(failure.begin(), failure.end(), '\n', ' ');
    os << r.run_id() << ',' << r.m << ',' << r.seed << ',' << to_string(r.method) << ',' << num(r.v_d) << ','
       << (r.feasible ? 1 : 0) << ',' << num(r.t_f_star) << ',' << num(r.t_f_initial) << ',' << r.slot << ','
       << num(r.pair_disruption) << ',' << num(r.global_disruption) << ',' << r.n_iter << ','
       << num(r.t_iter_avg) << ',' << (r.audit_passed ? 1 : 0) << ','
       << (r.audit ? num(r.audit->min_headway_slack) : "") << ',' << failure << '\n';
  }
}

namespace {

nlohmann::json row_json(const AggregateRow& r) {
  return {{"runs", r.runs},
          {"feasible", r.feasible},
          {"t_f_star", r.t_f_star},
          {"pair_disruption", r.pair_disruption},
          {"global_disruption", r.global_disruption},
          {"n_iter", r.n_iter},
          {"t_iter_avg", r.t_iter_avg}};
}

nlohmann::json report_json(const MethodReport& r) {
  nlohmann::json j = {{"run_id", r.run_id()},
                      {"m", r.m},
                      {"seed", r.seed},
                      {"method", to_string(r.method)},
                      {"v_d", r.v_d},
                      {"feasible", r.feasible},
                      {"t_f_star", r.t_f_star},
                      {"t_f_initial", r.t_f_initial},
                      {"slot", r.slot},
                      {"pair_disruption", r.pair_disruption},
                      {"global_disruption", r.global_disruption},
                      {"n_iter", r.n_iter},
                      {"t_iter_avg", r.t_iter_avg},
                      {"audit_passed", r.audit_passed},
                      {"failure", r.failure}};
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& it : r.iterations) {
    iters.push_back({{"t_f", std::isfinite(it.t_f) ? nlohmann::json(it.t_f) : nlohmann::json(nullptr)},
                     {"seconds", it.seconds},
                     {"accepted", it.accepted},
                     {"note", it.note}});
  }
  j["iterations"] = std::move(iters);
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : r.cooperator_terminals) terms.push_back({{"x", t.position}, {"v", t.speed}});
  j["cooperator_terminals"] = std::move(terms);
  return j;
}

}  // namespace

void write_results_json(std::ostream& os, const SuiteResult& suite) {
  nlohmann::json j;
  j["schema_version"] = kResultsSchemaVersion;
  j["threads"] = suite.threads;
  j["wall_seconds"] = suite.wall_seconds;
  nlohmann::json results = nlohmann::json::object();
  for (const auto& r : suite.table) results[std::to_string(r.m)][to_string(r.method)] = row_json(r);
  j["results"] = std::move(results);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : suite.reports) runs.push_back(report_json(r));
  j["runs"] = std::move(runs);
  os << j.dump(2) << '\n';
}

void write_suite(const std::filesystem::path& dir, const SuiteResult& suite, bool trajectories) {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
  };
  {
    auto os = open(dir / "results.csv");
    write_results_csv(os, suite.table);
  }
  {
    auto os = open(dir / "runs.csv");
    write_runs_csv(os, suite.reports);
  }
  {
    auto os = open(dir / "results.json");
    write_results_json(os, suite);
  }
  if (trajectories) {
    std::filesystem::create_directories(dir / "trajectories");
    for (const auto& r : suite.reports) {
      if (!r.feasible) continue;
      auto os = open(dir / "trajectories" / (r.run_id() + ".csv"));
      write_trajectories_csv(os, r.trajectories);
    }
  }
}

void write_report(const std::filesystem::path& dir, const MethodReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "report.json");
    if (!os) throw std::runtime_error("cannot write " + (dir / "report.json").string());
    os << report_json(report).dump(2) << '\n';
  }
  if (report.feasible) {
    std::ofstream os(dir / "trajectories.csv");
    if (!os) throw std::runtime_error("cannot write " + (dir / "trajectories.csv").string());
    write_trajectories_csv(os, report.trajectories);
  }
}

}  // namespace lanechange
