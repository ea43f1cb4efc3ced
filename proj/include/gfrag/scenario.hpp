#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfrag/evolution.hpp"

namespace gfrag {

// Malformed or inconsistent configuration (exit code 2 in the CLI, as
// opposed to numeric failures which exit 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A fully specified problem instance: model functions, ambient space, grid
// window, initial datum, and run controls.  Built either from an INI-style
// config file (schema in configs/README.md) or from a named builtin.
struct Scenario {
  std::string name = "scenario";
  WeightedSpace space;
  double x_min = 1e-4;
  double x_max = 50.0;
  int grid_n = 512;
  GrowthRate growth;
  AbsorptionRate absorption;
  Kernel kernel;
  std::function<double(double)> initial;
  std::string initial_desc;
  double tail_tol = 1e-8;
  unsigned seed = 1234;
  double t_max = 2.0;

  static Scenario from_config(const std::string& path);
  static Scenario builtin(const std::string& name);
  static std::vector<std::string> builtin_names();

  RegimeReport classify() const;
  GridPtr make_grid(int n_override = 0) const;
  // Samples the initial datum; throws std::invalid_argument when the
  // truncated-tail weight exceeds tail_tol (truncation is surfaced, never
  // silently accepted).
  GridFunction initial_datum(const GridPtr& g) const;
  // Relative weighted mass of the initial datum outside [x_min, x_max].
  double initial_tail_weight() const;
};

// Which certified result (if any) covers asynchronous exponential growth
// for the scenario, with every hypothesis check attached.
struct ApplicabilityReport {
  RegimeReport regime;
  DeschReport desch;
  ThresholdReport thresholds;
  std::vector<SublevelVerdict> thin;
  IrreducibilityReport irreducibility;
  double tail_weight = 0.0;
  bool tail_ok = true;
  std::string verdict;   // "Thm-Main-result" | "Thm-Main-result-Bis" | "none"
  std::string failing;   // named failing hypothesis when verdict == none
  std::string banner;    // warning attached when no theorem applies
};

ApplicabilityReport applicability(const Scenario& s);

}  // namespace gfrag
