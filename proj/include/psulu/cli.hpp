#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include "psulu/montecarlo.hpp"
#include "psulu/scenario.hpp"

namespace psulu {

// Exit codes shared by every command; 1 is left to the argument parser.
enum ExitCode {
  kOk = 0,
  kParseError = 2,
  kValidationError = 3,
  kInfeasible = 4,
  kSolverFailure = 5,
};

struct PlanArgs {
  std::string scenario;
  std::string out; // plan JSON; empty writes nothing
  std::string svg;
  std::string csv;
  bool fixed_risk = false; // uniform-allocation baseline instead of reallocation
  bool open_loop = false;  // drop the scenario's feedback gain
  std::uint64_t seed = 0;  // instance seed for generator scenarios
};

struct ValidateArgs {
  std::string plan;
  std::string scenario;
  int samples = 100000;
  std::uint64_t seed = 0; // simulation seed
  std::string report;     // report JSON; empty writes nothing
};

struct SweepArgs {
  std::string scenario;
  // "delta=0.1,0.01;method=nira-open,nira-closed,fixed;instances=20".
  // delta entries override every chance constraint's budget; the keyword
  // `scenario` keeps the file's budgets. Methods: nira-open (open loop),
  // nira-closed (the scenario's feedback), fixed (open loop, uniform
  // allocation held fixed).
  std::string grid;
  std::string out; // CSV
  std::uint64_t seed = 0;
  int samples = 10000; // per-row validation samples
};

int run_plan(const PlanArgs& args, std::ostream& log);
int run_validate(const ValidateArgs& args, std::ostream& log);
int run_sweep(const SweepArgs& args, std::ostream& log);

// Rendering behind the --svg/--csv flags: nominal path polyline, recognized
// axis-aligned region polygons, and per-step 3-sigma covariance ellipses;
// trajectory table with 17 significant digits.
void write_svg(const std::string& path, const Scenario& s, const PlanSolution& sol);
void write_csv(const std::string& path, const Scenario& s, const PlanSolution& sol);

nlohmann::json validation_to_json(const ValidationReport& rep);

} // namespace psulu
