// Command-line front end. Exit codes: 0 feasible, 1 input error, 2 infeasible.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lanechange/bench.hpp"
#include "lanechange/io.hpp"
#include "lanechange/reachability.hpp"

using namespace lanechange;

namespace {

constexpr int kFeasible = 0;
constexpr int kInputError = 1;
constexpr int kInfeasible = 2;

ExperimentConfig experiment_or_default(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  return load_experiment(path);
}

void print_report(const MethodReport& r, bool verbose) {
  std::printf("method            %s\n", to_string(r.method).c_str());
  std::printf("feasible          %s\n", r.feasible ? "yes" : "no");
  if (r.feasible) {
    std::printf("t_f               %.4f s\n", r.t_f_star);
    std::printf("slot              %d\n", r.slot);
    std::printf("pair_disruption   %.6g\n", r.pair_disruption);
    std::printf("global_disruption %.6g\n", r.global_disruption);
    std::printf("safety audit      %s (min headway slack %.3g m)\n", r.audit_passed ? "pass" : "FAIL",
                r.audit ? r.audit->min_headway_slack : 0.0);
  } else {
    std::printf("failure           %s\n", r.failure.c_str());
  }
  std::printf("n_iter            %d\n", r.n_iter);
  std::printf("t_iter_avg        %.4f s\n", r.t_iter_avg);
  if (verbose) {
    for (std::size_t k = 0; k < r.iterations.size(); ++k) {
      const auto& it = r.iterations[k];
      std::printf("  iter %zu: t_f %.4f %s %s\n", k + 1, it.t_f, it.accepted ? "accepted" : "rejected",
                  it.note.c_str());
    }
  }
}

void print_table(const std::vector<AggregateRow>& table) {
  std::printf("%4s  %-18s %9s %12s %12s %7s %11s %9s\n", "|S|", "method", "t_f_star", "pair_D", "global_D", "n_iter",
              "t_iter_avg", "feasible");
  for (const auto& r : table) {
    std::printf("%4d  %-18s %9.3f %12.5g %12.5g %7.2f %11.4f %4d/%-4d\n", r.m, to_string(r.method).c_str(), r.t_f_star,
                r.pair_disruption, r.global_disruption, r.n_iter, r.t_iter_avg, r.feasible, r.runs);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative lane-change coordination: solve, benchmark and inspect scenarios"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print per-iteration details");

  std::string scenario_path, config_path, method_name = "pa2", run_out, bench_out, plan_out;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Solve one scenario file with one method");
  run->add_option("scenario", scenario_path, "Scenario YAML file")->required();
  run->add_option("--method", method_name, "baseline-position, baseline-full, pa1 or pa2");
  run->add_option("--config", config_path, "Experiment YAML supplying solver and method settings");
  run->add_option("--out", run_out, "Output directory for report.json and trajectories.csv");

  std::string experiment_path;
  std::vector<std::string> bench_methods;
  auto* bench = app.add_subcommand("bench", "Run a seeded experiment suite");
  bench->add_option("experiment", experiment_path, "Experiment YAML file");
  bench->add_option("--config", config_path, "Experiment YAML file (alternative to the positional)");
  bench->add_option("--out", bench_out, "Output directory")->default_val("results");
  bench->add_option("--seed", seed, "Run only this seed");
  bench->add_option("--method", bench_methods, "Restrict to these methods");

  std::vector<double> origin, query;
  double horizon = 0.0;
  auto* reach = app.add_subcommand("reach", "Reachable-set membership of a terminal state");
  reach->add_option("--origin", origin, "Initial state x,v")->required()->expected(2)->delimiter(',');
  reach->add_option("--t", horizon, "Horizon in seconds")->required();
  reach->add_option("--query", query, "Terminal state x,v")->required()->expected(2)->delimiter(',');
  reach->add_option("--config", config_path, "Experiment YAML supplying the limits");

  int cooperators = 3;
  auto* plan = app.add_subcommand("plan", "Export a scenario and its trajectories");
  plan->add_option("scenario", scenario_path, "Scenario YAML file (omit to generate one from --seed)");
  plan->add_option("--seed", seed, "Generate the scenario from this seed");
  plan->add_option("-m,--cooperators", cooperators, "Cooperator count for a generated scenario");
  plan->add_option("--method", method_name, "baseline-position, baseline-full, pa1 or pa2");
  plan->add_option("--config", config_path, "Experiment YAML supplying generator and solver settings");
  plan->add_option("--out", plan_out, "Output directory")->default_val("plan");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kFeasible : kInputError;
  }

  try {
    if (*run) {
      const Method method = method_from_string(method_name);
      const ExperimentConfig cfg = experiment_or_default(config_path);
      const ScenarioFile file = load_scenario(scenario_path);
      MethodReport r = run_method(file.scenario, file.v_d, method, cfg);
      print_report(r, verbose);
      if (!run_out.empty()) write_report(run_out, r);
      return r.feasible ? kFeasible : kInfeasible;
    }

    if (*bench) {
      if (experiment_path.empty()) experiment_path = config_path;
      if (experiment_path.empty()) {
        std::fprintf(stderr, "bench: an experiment file is required\n");
        return kInputError;
      }
      ExperimentConfig cfg = load_experiment(experiment_path);
      if (seed) cfg.seeds = {*seed};
      if (!bench_methods.empty()) {
        cfg.methods.clear();
        for (const auto& name : bench_methods) cfg.methods.push_back(method_from_string(name));
      }
      const SuiteResult suite = run_suite(cfg);
      write_suite(bench_out, suite, cfg.write_trajectories);
      print_table(suite.table);
      std::printf("%zu runs on %d thread(s) in %.1f s; results in %s\n", suite.reports.size(), suite.threads,
                  suite.wall_seconds, bench_out.c_str());
      if (verbose) {
        for (const auto& r : suite.reports) {
          if (!r.feasible) std::printf("  %s: %s\n", r.run_id().c_str(), r.failure.c_str());
        }
      }
      bool any = suite.reports.empty();
      for (const auto& r : suite.reports) any = any || r.feasible;
      return any ? kFeasible : kInfeasible;
    }

    if (*reach) {
      if (!(horizon > 0.0)) {
        std::fprintf(stderr, "reach: --t must be positive\n");
        return kInputError;
      }
      const ExperimentConfig cfg = experiment_or_default(config_path);
      const ActuationLimits& lim = cfg.generator.limits;
      const VehicleState o{origin[0], origin[1]};
      const Membership m = classify(query[0], query[1], horizon, o, lim);
      const bool boundary = m.member && (std::abs(m.p_upper) <= m.tolerance || std::abs(m.p_lower) <= m.tolerance);
      const VehicleState hi = constant_control_endpoint(o, lim.u_max, horizon);
      const VehicleState lo = constant_control_endpoint(o, lim.u_min, horizon);
      std::printf("p_upper     %.9g\n", m.p_upper);
      std::printf("p_lower     %.9g\n", m.p_lower);
      std::printf("speed_ok    %s\n", m.speed_ok ? "yes" : "no");
      std::printf("member      %s\n", m.member ? "yes" : "no");
      std::printf("location    %s\n", !m.member ? "outside" : boundary ? "boundary" : "interior");
      std::printf("u_max end   (%.9g, %.9g)\n", hi.position, hi.speed);
      std::printf("u_min end   (%.9g, %.9g)\n", lo.position, lo.speed);
      return kFeasible;
    }

    if (*plan) {
      const Method method = method_from_string(method_name);
      const ExperimentConfig cfg = experiment_or_default(config_path);
      ScenarioFile file;
      if (!scenario_path.empty()) {
        file = load_scenario(scenario_path);
      } else if (seed) {
        const auto gen = generate_scenario(*seed, cooperators, cfg.generator);
        file.scenario = gen.scenario;
        file.v_d = gen.v_d;
      } else {
        std::fprintf(stderr, "plan: give a scenario file or --seed\n");
        return kInputError;
      }
      MethodReport r = run_method(file.scenario, file.v_d, method, cfg);
      print_report(r, verbose);
      std::filesystem::create_directories(plan_out);
      std::ofstream os(std::filesystem::path(plan_out) / "scenario.yaml");
      write_scenario(os, file);
      write_report(plan_out, r);
      return r.feasible ? kFeasible : kInfeasible;
    }
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}
