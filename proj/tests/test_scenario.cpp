#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "psulu/scenario.hpp"

using namespace psulu;
using nlohmann::json;

namespace {

json base_doc() {
  return json::parse(R"({
    "name": "fixture",
    "plant": {"type": "double_integrator", "dt": 1.0, "N": 10, "sigma": 0.01, "u_max": 1.0},
    "initial": {"mean": [0, 0, 0, 0], "cov_diag": [0.0001, 0.0001, 0, 0]},
    "feedback": {"type": "open_loop"},
    "regions": {
      "hazard": {"type": "obstacle", "box": [0.4, 0.6, 0.4, 0.6]},
      "room": {"type": "box", "box": [-1, 2, -1, 2]}
    },
    "events": ["start", "goal"],
    "end_event": "goal",
    "episodes": [
      {"name": "avoid", "kind": "remain_in", "start": "start", "end": "goal", "region": "hazard"},
      {"name": "stay", "kind": "remain_in", "start": "start", "end": "goal", "region": "room"}
    ],
    "stcs": [{"from": "start", "to": "goal", "lb": 10, "ub": 10}],
    "chance_constraints": [
      {"name": "obstacles", "delta": 0.01, "episodes": ["avoid"]},
      {"name": "walls", "delta": 0.05, "episodes": ["stay"]}
    ],
    "pins": [{"step": 10, "H": [[1, 0, 0, 0], [0, 1, 0, 0]], "g": [1, 1]}],
    "objective": {"kind": "manhattan", "weight": 2.5}
  })");
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool same_region(const Region& a, const Region& b) {
  if (a.cnf.size() != b.cnf.size()) return false;
  for (size_t c = 0; c < a.cnf.size(); ++c) {
    if (a.cnf[c].size() != b.cnf[c].size()) return false;
    for (size_t j = 0; j < a.cnf[c].size(); ++j)
      if (a.cnf[c][j].h != b.cnf[c][j].h || a.cnf[c][j].g != b.cnf[c][j].g) return false;
  }
  return true;
}

} // namespace

TEST_CASE("a parsed scenario carries the document's structure") {
  const Scenario s = parse_scenario(base_doc());

  CHECK(s.name == "fixture");
  CHECK(s.model.N == 10);
  CHECK(s.model.n_x() == 4);
  CHECK(s.model.n_u() == 2);
  CHECK(s.model.dt == 1.0);
  CHECK(s.init.mean.size() == 4);
  CHECK(s.init.cov(0, 0) == 0.0001);
  CHECK(s.init.cov(2, 2) == 0.0);
  CHECK_FALSE(s.feedback.closed_loop());

  REQUIRE(s.ccqsp.events.size() == 2);
  CHECK(s.ccqsp.end_event == 1);
  REQUIRE(s.ccqsp.episodes.size() == 2);
  CHECK(s.ccqsp.episodes[0].kind == Episode::RemainIn);
  CHECK(s.ccqsp.episodes[0].region.cnf.size() == 1);     // obstacle: one clause
  CHECK(s.ccqsp.episodes[0].region.cnf[0].size() == 4);  //   of four ways out
  CHECK(s.ccqsp.episodes[1].region.cnf.size() == 4);     // box: four conjuncts
  REQUIRE(s.ccqsp.stcs.size() == 1);
  CHECK(s.ccqsp.stcs[0].lb == 10.0);
  CHECK(s.ccqsp.stcs[0].ub == 10.0);
  REQUIRE(s.ccqsp.chance_constraints.size() == 2);
  CHECK(s.ccqsp.chance_constraints[0].delta == 0.01);
  CHECK(s.ccqsp.chance_constraints[1].episodes == std::vector<int>{1});

  REQUIRE(s.pins.size() == 1);
  CHECK(s.pins[0].step == 10);
  CHECK(s.pins[0].H.rows() == 2);
  CHECK(s.pins[0].g[1] == 1.0);
  CHECK(s.objective.kind == Objective::Kind::ManhattanControl);
  CHECK(s.objective.weight == 2.5);
  CHECK(s.generator.targets.empty());
}

TEST_CASE("an stc without an upper bound parses as unbounded") {
  json doc = base_doc();
  doc["stcs"] = json::array({json{{"from", "start"}, {"to", "goal"}, {"lb", 3}, {"ub", nullptr}},
                             json{{"from", "start"}, {"to", "goal"}, {"lb", 1}}});
  const Scenario s = parse_scenario(doc);
  REQUIRE(s.ccqsp.stcs.size() == 2);
  CHECK(std::isinf(s.ccqsp.stcs[0].ub));
  CHECK(std::isinf(s.ccqsp.stcs[1].ub));
}

TEST_CASE("lqr feedback resolves to the gain the factory computes") {
  json doc = base_doc();
  doc["feedback"] = {{"type", "lqr"}, {"q_diag", {1, 1, 1, 1}}, {"r_diag", {10000, 10000}}};
  const Scenario s = parse_scenario(doc);
  REQUIRE(s.feedback.closed_loop());

  const Eigen::MatrixXd K =
      lqr_gain(s.model.A, s.model.B, Eigen::MatrixXd::Identity(4, 4),
               1e4 * Eigen::MatrixXd::Identity(2, 2));
  CHECK(s.feedback.K == K); // same routine, same inputs, bitwise equal
}

TEST_CASE("cw and explicit plants parse to their factory matrices") {
  json doc = base_doc();
  doc["feedback"] = {{"type", "open_loop"}};
  doc["regions"] = json::object();
  doc["episodes"] = json::array();
  doc["chance_constraints"] = json::array();
  doc["pins"] = json::array();
  doc["initial"] = {{"mean", {0, -5000, 0, 0}}, {"cov_diag", {1, 1, 0, 0}}};
  doc["plant"] = {{"type", "cw"},     {"omega", 0.001164}, {"dt", 120.0},
                  {"N", 5},           {"u_max", 4.6},      {"n_rays", 8},
                  {"sigma_w_diag", {1e-6, 1e-6, 0, 0}}};
  const Scenario cw = parse_scenario(doc);
  const auto [A, B] = cw_discrete(0.001164, 120.0);
  CHECK(cw.model.A == A);
  CHECK(cw.model.B == B);
  CHECK(cw.model.Sigma_w(1, 1) == 1e-6);
  CHECK(cw.model.U.rows() == 8);

  // explicit round trip: the serializer normalizes every plant to this form
  const json again = scenario_to_json(cw);
  CHECK(again["plant"]["type"] == "explicit");
  const Scenario back = parse_scenario(again);
  CHECK(back.model.A == cw.model.A);
  CHECK(back.model.B == cw.model.B);
  CHECK(back.model.U.H == cw.model.U.H);
  CHECK(back.model.U.g == cw.model.U.g);
}

TEST_CASE("save then load reproduces the scenario exactly") {
  json doc = base_doc();
  doc["feedback"] = {{"type", "lqr"}, {"q_diag", {1, 1, 1, 1}}, {"r_diag", {100, 100}}};
  doc["generator"] = {{"targets", {"hazard"}}, {"count", 7}, {"half_lo", 0.1}};
  const Scenario s = parse_scenario(doc);

  const std::string path = temp_path("scenario_roundtrip.json");
  save_scenario(s, path);
  const Scenario t = load_scenario(path);
  std::remove(path.c_str());

  CHECK(t.model.A == s.model.A);
  CHECK(t.model.B == s.model.B);
  CHECK(t.model.Sigma_w == s.model.Sigma_w);
  CHECK(t.model.U.H == s.model.U.H);
  CHECK(t.init.mean == s.init.mean);
  CHECK(t.init.cov == s.init.cov);
  CHECK(t.feedback.K == s.feedback.K);
  REQUIRE(t.regions.size() == s.regions.size());
  for (size_t i = 0; i < s.regions.size(); ++i) CHECK(same_region(t.regions[i], s.regions[i]));
  REQUIRE(t.ccqsp.episodes.size() == s.ccqsp.episodes.size());
  for (size_t e = 0; e < s.ccqsp.episodes.size(); ++e) {
    CHECK(t.ccqsp.episodes[e].kind == s.ccqsp.episodes[e].kind);
    CHECK(same_region(t.ccqsp.episodes[e].region, s.ccqsp.episodes[e].region));
  }
  CHECK(t.ccqsp.stcs.size() == s.ccqsp.stcs.size());
  CHECK(t.ccqsp.chance_constraints[0].delta == s.ccqsp.chance_constraints[0].delta);
  REQUIRE(t.pins.size() == 1);
  CHECK(t.pins[0].H == s.pins[0].H);
  CHECK(t.pins[0].g == s.pins[0].g);
  CHECK(t.objective.kind == s.objective.kind);
  CHECK(t.objective.weight == s.objective.weight);
  CHECK(t.generator.count == 7);
  CHECK(t.generator.half_lo == 0.1);
  CHECK(t.generator.targets == s.generator.targets);

  // and the normalized form is a fixed point
  CHECK(scenario_to_json(t) == scenario_to_json(s));
}

TEST_CASE("the hash tracks content, not formatting") {
  const Scenario s = parse_scenario(base_doc());

  // reformat: dump with different indentation and key insertion order
  json doc = base_doc();
  json shuffled;
  shuffled["objective"] = doc["objective"];
  shuffled["plant"] = doc["plant"];
  for (const auto& [k, v] : doc.items()) shuffled[k] = v;
  const Scenario t = parse_scenario(shuffled);
  CHECK(scenario_hash(t) == scenario_hash(s));

  json changed = base_doc();
  changed["chance_constraints"][0]["delta"] = 0.02;
  CHECK(scenario_hash(parse_scenario(changed)) != scenario_hash(s));

  json renamed = base_doc();
  renamed["name"] = "other";
  CHECK(scenario_hash(parse_scenario(renamed)) != scenario_hash(s));
}

TEST_CASE("malformed documents raise parse errors") {
  CHECK_THROWS_AS(parse_scenario(json::parse("{}")), ScenarioParseError);

  json no_plant = base_doc();
  no_plant.erase("plant");
  CHECK_THROWS_AS(parse_scenario(no_plant), ScenarioParseError);

  json bad_region = base_doc();
  bad_region["episodes"][0]["region"] = "nowhere";
  CHECK_THROWS_AS(parse_scenario(bad_region), ScenarioParseError);

  json bad_event = base_doc();
  bad_event["stcs"][0]["to"] = "nowhere";
  CHECK_THROWS_AS(parse_scenario(bad_event), ScenarioParseError);

  json bad_kind = base_doc();
  bad_kind["episodes"][0]["kind"] = "hover_near";
  CHECK_THROWS_AS(parse_scenario(bad_kind), ScenarioParseError);

  json bad_type = base_doc();
  bad_type["plant"]["type"] = "unicycle";
  CHECK_THROWS_AS(parse_scenario(bad_type), ScenarioParseError);

  json ragged = base_doc();
  ragged["pins"][0]["H"] = {{1, 0, 0, 0}, {0, 1}};
  CHECK_THROWS_AS(parse_scenario(ragged), ScenarioParseError);
}

TEST_CASE("structurally invalid plans raise validation errors") {
  json bad_delta = base_doc();
  bad_delta["chance_constraints"][0]["delta"] = 0.7;
  CHECK_THROWS_AS(parse_scenario(bad_delta), ScenarioValidationError);

  json orphan = base_doc();
  orphan["chance_constraints"] = json::array(
      {json{{"name", "obstacles"}, {"delta", 0.01}, {"episodes", {"avoid"}}}});
  CHECK_THROWS_AS(parse_scenario(orphan), ScenarioValidationError);
}

TEST_CASE("load reports unreadable and unparseable files distinctly from bad content") {
  CHECK_THROWS_AS(load_scenario(temp_path("does_not_exist.json")), ScenarioParseError);

  const std::string path = temp_path("scenario_garbage.json");
  std::ofstream(path) << "{not json";
  CHECK_THROWS_AS(load_scenario(path), ScenarioParseError);
  std::remove(path.c_str());
}

TEST_CASE("instances are deterministic in the seed and respect the ranges") {
  json doc = base_doc();
  doc["generator"] = {{"targets", {"hazard"}}};
  const Scenario base = parse_scenario(doc);

  const Scenario a = make_instance(base, 42);
  const Scenario b = make_instance(base, 42);
  CHECK(scenario_hash(a) == scenario_hash(b));
  CHECK(scenario_hash(make_instance(base, 43)) != scenario_hash(a));

  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scenario inst = make_instance(base, seed);
    // obstacle clause rows: x <= xlo, x >= xhi, y <= ylo, y >= yhi
    const auto& dis = inst.ccqsp.episodes[0].region.cnf[0];
    REQUIRE(dis.size() == 4);
    const double xlo = dis[0].g, xhi = -dis[1].g, ylo = dis[2].g, yhi = -dis[3].g;
    const double cx = 0.5 * (xlo + xhi), cy = 0.5 * (ylo + yhi);
    CHECK(0.5 * (xhi - xlo) >= base.generator.half_lo);
    CHECK(0.5 * (xhi - xlo) <= base.generator.half_hi);
    CHECK(0.5 * (yhi - ylo) >= base.generator.half_lo);
    CHECK(0.5 * (yhi - ylo) <= base.generator.half_hi);
    CHECK(cx >= base.generator.center_lo);
    CHECK(cx <= base.generator.center_hi);
    CHECK(cy >= base.generator.center_lo);
    CHECK(cy <= base.generator.center_hi);
    CHECK(std::abs(cx - cy) <= base.generator.diag_band);
    // the library copy and the episode copy stay in sync
    CHECK(same_region(inst.regions[0], inst.ccqsp.episodes[0].region));
  }

  // without a generator block the scenario passes through untouched
  const Scenario plain = parse_scenario(base_doc());
  CHECK(scenario_hash(make_instance(plain, 99)) == scenario_hash(plain));
}

TEST_CASE("plan files survive a save and load with nothing lost") {
  PlanFile p;
  p.tool = "psulu test";
  p.scenario_hash = "00c0ffee00c0ffee";
  p.config = {{"seed", 7}, {"fixed_risk", true}, {"open_loop", false}};
  p.solution.status = SolveStatus::Optimal;
  p.solution.schedule.step = {0, 4, 10};
  p.solution.objective = 1.25;
  p.solution.controls = {Eigen::Vector2d(0.25, -0.5), Eigen::Vector2d(1e-17, 3.0)};
  p.solution.alloc.delta = {{0.004, 0.006}, {0.05}};
  p.solution.alloc.eps = Eigen::MatrixXd::Constant(2, 3, 0.125);
  p.solution.alloc.tcmax = {10, 10};
  p.solution.risk_certificate = {0.01, 0.05};
  p.solution.note = "fixture";
  p.solution.nodes_visited = 12;
  p.solution.leaves_solved = 3;
  p.solution.pruned = 5;

  const std::string path = temp_path("plan_roundtrip.json");
  save_plan(p, path);
  const PlanFile q = load_plan(path);
  std::remove(path.c_str());

  CHECK(q.tool == p.tool);
  CHECK(q.scenario_hash == p.scenario_hash);
  CHECK(q.config == p.config);
  CHECK(q.solution.status == SolveStatus::Optimal);
  CHECK(q.solution.schedule.step == p.solution.schedule.step);
  CHECK(q.solution.objective == p.solution.objective);
  REQUIRE(q.solution.controls.size() == 2);
  CHECK(q.solution.controls[0] == p.solution.controls[0]);
  CHECK(q.solution.controls[1] == p.solution.controls[1]); // 1e-17 intact
  CHECK(q.solution.alloc.delta == p.solution.alloc.delta);
  CHECK(q.solution.alloc.eps == p.solution.alloc.eps);
  CHECK(q.solution.alloc.tcmax == p.solution.alloc.tcmax);
  CHECK(q.solution.risk_certificate == p.solution.risk_certificate);
  CHECK(q.solution.note == p.solution.note);
  CHECK(q.solution.nodes_visited == 12);
  CHECK(q.solution.leaves_solved == 3);
  CHECK(q.solution.pruned == 5);

  CHECK_THROWS_AS(load_plan(temp_path("missing_plan.json")), ScenarioParseError);
}
