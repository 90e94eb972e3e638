#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "psulu/ccqsp.hpp"
#include "psulu/dynamics.hpp"
#include "psulu/scheduler.hpp"

namespace psulu {

// The scenario file could not be read as a scenario at all.
struct ScenarioParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// The scenario parsed but its plan fails structural validation.
struct ScenarioValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a planning run needs, loaded from one JSON document. Regions are
// a named library; episodes refer to them by name and carry the resolved CNF.
struct Scenario {
  std::string name;
  StochasticPlantModel model;
  InitialCondition init;
  FeedbackPolicy feedback;
  Ccqsp ccqsp;
  std::vector<MeanEquality> pins;
  Objective objective;

  std::vector<std::string> region_names;
  std::vector<Region> regions;
  std::vector<std::string> episode_region; // library name per episode

  // Randomized-obstacle block for benchmark sweeps; count 0 means absent.
  // Targets name the library regions to regenerate per instance.
  struct ObstacleGenerator {
    int count = 0;
    std::vector<std::string> targets;
    double half_lo = 0.08, half_hi = 0.15; // box half extents, per axis
    double center_lo = 0.2, center_hi = 0.8;
    double diag_band = 0.45; // keep |cx - cy| within this of the diagonal
  } generator;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

// FNV-1a over the normalized serialization, as a hex string. Stable across
// cosmetic reformatting of the input file.
std::string scenario_hash(const Scenario& s);

// Fresh instance with every generator target replaced by a random axis-
// aligned obstacle drawn from the generator's ranges. Deterministic in seed.
Scenario make_instance(const Scenario& base, std::uint64_t seed);

// A solved plan with enough provenance to validate it later against the
// scenario it came from. config is a free-form snapshot of the knobs and
// flags the planning run used.
struct PlanFile {
  std::string tool;
  std::string scenario_hash;
  nlohmann::json config = nlohmann::json::object();
  PlanSolution solution;
};

nlohmann::json plan_to_json(const PlanFile& p);
PlanFile parse_plan(const nlohmann::json& doc);
PlanFile load_plan(const std::string& path);
void save_plan(const PlanFile& p, const std::string& path);

} // namespace psulu
