#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "lanechange/bench.hpp"
#include "lanechange/scenario.hpp"

namespace lanechange {

/// Malformed or invalid input file. what() reads "<source>:<line>: <message>", or
/// "<source>: <message>" when no position applies (line 0).
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct ScenarioFile {
  Scenario scenario;
  double v_d = 30.0;  // m/s
};

/// YAML scenario with unit-suffixed keys (position_m, speed_mps, ...). Unknown keys and
/// scenarios failing validate_scenario raise InputError naming the offending vehicle.
ScenarioFile parse_scenario(const std::string& text, const std::string& source = "<scenario>");
ScenarioFile load_scenario(const std::filesystem::path& path);
void write_scenario(std::ostream& os, const ScenarioFile& file);

/// YAML experiment description; every section is optional and falls back to the defaults.
ExperimentConfig parse_experiment(const std::string& text, const std::string& source = "<experiment>");
ExperimentConfig load_experiment(const std::filesystem::path& path);
void write_experiment(std::ostream& os, const ExperimentConfig& config);

}  // namespace lanechange
