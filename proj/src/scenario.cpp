#include "psulu/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace psulu {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ScenarioParseError("scenario: " + msg); }

const json& require(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

Eigen::VectorXd to_vector(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<long>(i)] = arr[i].get<double>();
  return v;
}

Eigen::MatrixXd to_matrix(const json& rows) {
  const long m = static_cast<long>(rows.size());
  if (m == 0) return {};
  const long n = static_cast<long>(rows[0].size());
  Eigen::MatrixXd mat(m, n);
  for (long i = 0; i < m; ++i) {
    if (static_cast<long>(rows[static_cast<size_t>(i)].size()) != n)
      fail("ragged matrix rows");
    for (long j = 0; j < n; ++j)
      mat(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)].get<double>();
  }
  return mat;
}

json from_vector(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json from_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

StochasticPlantModel parse_plant(const json& doc) {
  const std::string type = require(doc, "type").get<std::string>();
  StochasticPlantModel m;
  if (type == "double_integrator") {
    auto di = double_integrator(require(doc, "dt").get<double>(),
                                require(doc, "sigma").get<double>(),
                                require(doc, "u_max").get<double>(),
                                doc.value("v_max", 1.0), doc.value("n_rays", 8));
    m = di.model;
  } else if (type == "cw") {
    const auto [A, B] =
        cw_discrete(require(doc, "omega").get<double>(), require(doc, "dt").get<double>());
    m.A = A;
    m.B = B;
    m.dt = require(doc, "dt").get<double>();
    m.Sigma_w = doc.contains("sigma_w_diag")
                    ? Eigen::MatrixXd(to_vector(doc["sigma_w_diag"]).asDiagonal())
                    : to_matrix(require(doc, "Sigma_w"));
    m.U = ray_polytope(require(doc, "u_max").get<double>(), doc.value("n_rays", 8));
  } else if (type == "explicit") {
    m.A = to_matrix(require(doc, "A"));
    m.B = to_matrix(require(doc, "B"));
    m.Sigma_w = to_matrix(require(doc, "Sigma_w"));
    m.dt = require(doc, "dt").get<double>();
    m.U.H = to_matrix(doc.value("U_H", json::array()));
    m.U.g = to_vector(doc.value("U_g", json::array()));
    if (m.U.H.rows() != m.U.g.size()) fail("control polytope H and g disagree");
  } else {
    fail("unknown plant type '" + type + "'");
  }
  m.N = require(doc, "N").get<int>();
  if (m.N < 1) fail("horizon N must be positive");
  return m;
}

json plant_to_json(const StochasticPlantModel& m) {
  json doc;
  doc["type"] = "explicit";
  doc["dt"] = m.dt;
  doc["N"] = m.N;
  doc["A"] = from_matrix(m.A);
  doc["B"] = from_matrix(m.B);
  doc["Sigma_w"] = from_matrix(m.Sigma_w);
  doc["U_H"] = from_matrix(m.U.H);
  doc["U_g"] = from_vector(m.U.g);
  return doc;
}

Region parse_region(const json& doc, int n_x) {
  const std::string type = require(doc, "type").get<std::string>();
  if (type == "box" || type == "obstacle") {
    const json& b = require(doc, "box");
    if (b.size() != 4) fail("region box wants [xlo, xhi, ylo, yhi]");
    const int ix = doc.value("ix", 0);
    const int iy = doc.value("iy", 1);
    return type == "box" ? box_region(b[0], b[1], b[2], b[3], n_x, ix, iy)
                         : obstacle_region(b[0], b[1], b[2], b[3], n_x, ix, iy);
  }
  if (type == "speed")
    return speed_region(require(doc, "v_max").get<double>(), doc.value("n_rays", 8), n_x,
                        doc.value("ivx", 2), doc.value("ivy", 3));
  if (type == "cnf") {
    Region r;
    for (const json& conj : require(doc, "cnf")) {
      std::vector<HalfSpace> dis;
      for (const json& hs : conj)
        dis.push_back({to_vector(require(hs, "h")), require(hs, "g").get<double>()});
      r.cnf.push_back(std::move(dis));
    }
    return r;
  }
  fail("unknown region type '" + type + "'");
}

json region_to_json(const Region& r) {
  json conjs = json::array();
  for (const auto& dis : r.cnf) {
    json ds = json::array();
    for (const HalfSpace& hs : dis) ds.push_back({{"h", from_vector(hs.h)}, {"g", hs.g}});
    conjs.push_back(ds);
  }
  return {{"type", "cnf"}, {"cnf", conjs}};
}

int event_index(const Ccqsp& plan, const std::string& name) {
  for (size_t e = 0; e < plan.events.size(); ++e)
    if (plan.events[e].name == name) return static_cast<int>(e);
  fail("unknown event '" + name + "'");
}

} // namespace

Scenario parse_scenario(const json& doc) {
  Scenario s;
  try {
    s.name = doc.value("name", "");
    s.model = parse_plant(require(doc, "plant"));
    const int n_x = s.model.n_x();

    const json& init = require(doc, "initial");
    s.init.mean = to_vector(require(init, "mean"));
    if (init.contains("cov_diag"))
      s.init.cov = to_vector(init["cov_diag"]).asDiagonal();
    else
      s.init.cov = to_matrix(require(init, "cov"));
    if (s.init.mean.size() != n_x || s.init.cov.rows() != n_x)
      fail("initial condition dimension mismatch");

    const json& fb = require(doc, "feedback");
    const std::string fb_type = require(fb, "type").get<std::string>();
    if (fb_type == "lqr") {
      const Eigen::MatrixXd Q = fb.contains("q_diag")
                                    ? Eigen::MatrixXd(to_vector(fb["q_diag"]).asDiagonal())
                                    : to_matrix(require(fb, "Q"));
      const Eigen::MatrixXd R = fb.contains("r_diag")
                                    ? Eigen::MatrixXd(to_vector(fb["r_diag"]).asDiagonal())
                                    : to_matrix(require(fb, "R"));
      s.feedback.K = lqr_gain(s.model.A, s.model.B, Q, R);
    } else if (fb_type == "gain") {
      s.feedback.K = to_matrix(require(fb, "K"));
      if (s.feedback.K.rows() != s.model.n_u() || s.feedback.K.cols() != n_x)
        fail("feedback gain dimension mismatch");
    } else if (fb_type != "open_loop") {
      fail("unknown feedback type '" + fb_type + "'");
    }

    // Bind defaults to locals: iterating a temporary json dangles under C++20.
    const json regions_doc = doc.value("regions", json::object());
    for (const auto& [rname, rdoc] : regions_doc.items()) {
      s.region_names.push_back(rname);
      s.regions.push_back(parse_region(rdoc, n_x));
    }
    const auto region_index = [&](const std::string& rname) {
      for (size_t i = 0; i < s.region_names.size(); ++i)
        if (s.region_names[i] == rname) return static_cast<int>(i);
      fail("unknown region '" + rname + "'");
    };

    for (const json& ev : require(doc, "events")) s.ccqsp.events.push_back({ev.get<std::string>()});
    s.ccqsp.end_event = event_index(s.ccqsp, require(doc, "end_event").get<std::string>());

    const json episodes_doc = doc.value("episodes", json::array());
    for (const json& ep : episodes_doc) {
      Episode e;
      e.name = require(ep, "name").get<std::string>();
      e.start_event = event_index(s.ccqsp, require(ep, "start").get<std::string>());
      e.end_event = event_index(s.ccqsp, require(ep, "end").get<std::string>());
      const std::string kind = require(ep, "kind").get<std::string>();
      if (kind == "start_in")
        e.kind = Episode::StartIn;
      else if (kind == "end_in")
        e.kind = Episode::EndIn;
      else if (kind == "remain_in")
        e.kind = Episode::RemainIn;
      else
        fail("unknown episode kind '" + kind + "'");
      const std::string rname = require(ep, "region").get<std::string>();
      e.region = s.regions[static_cast<size_t>(region_index(rname))];
      s.episode_region.push_back(rname);
      s.ccqsp.episodes.push_back(std::move(e));
    }

    const json stcs_doc = doc.value("stcs", json::array());
    for (const json& tc : stcs_doc) {
      TemporalConstraint t;
      t.from = event_index(s.ccqsp, require(tc, "from").get<std::string>());
      t.to = event_index(s.ccqsp, require(tc, "to").get<std::string>());
      t.lb = require(tc, "lb").get<double>();
      t.ub = (!tc.contains("ub") || tc["ub"].is_null())
                 ? std::numeric_limits<double>::infinity()
                 : tc["ub"].get<double>();
      s.ccqsp.stcs.push_back(t);
    }

    const json ccs_doc = doc.value("chance_constraints", json::array());
    for (const json& cc : ccs_doc) {
      ChanceConstraint c;
      c.name = require(cc, "name").get<std::string>();
      c.delta = require(cc, "delta").get<double>();
      for (const json& en : require(cc, "episodes")) {
        const std::string target = en.get<std::string>();
        int found = -1;
        for (size_t i = 0; i < s.ccqsp.episodes.size(); ++i)
          if (s.ccqsp.episodes[i].name == target) found = static_cast<int>(i);
        if (found < 0) fail("unknown episode '" + target + "'");
        c.episodes.push_back(found);
      }
      s.ccqsp.chance_constraints.push_back(std::move(c));
    }

    const json pins_doc = doc.value("pins", json::array());
    for (const json& pin : pins_doc) {
      MeanEquality eq;
      eq.step = require(pin, "step").get<int>();
      eq.H = to_matrix(require(pin, "H"));
      eq.g = to_vector(require(pin, "g"));
      if (eq.H.rows() != eq.g.size() || eq.H.cols() != n_x) fail("pin dimension mismatch");
      s.pins.push_back(std::move(eq));
    }

    const json& obj = doc.value("objective", json({{"kind", "manhattan"}}));
    const std::string kind = require(obj, "kind").get<std::string>();
    if (kind == "manhattan")
      s.objective.kind = Objective::Kind::ManhattanControl;
    else if (kind == "linear")
      s.objective.kind = Objective::Kind::LinearControl;
    else if (kind == "quadratic")
      s.objective.kind = Objective::Kind::QuadraticExpectedControl;
    else if (kind == "end_time")
      s.objective.kind = Objective::Kind::EndTime;
    else
      fail("unknown objective kind '" + kind + "'");
    s.objective.weight = obj.value("weight", 1.0);
    if (obj.contains("linear")) s.objective.linear = to_vector(obj["linear"]);

    if (doc.contains("generator")) {
      const json& g = doc["generator"];
      for (const json& t : require(g, "targets")) s.generator.targets.push_back(t.get<std::string>());
      for (const auto& t : s.generator.targets) region_index(t);
      s.generator.count = g.value("count", 20);
      s.generator.half_lo = g.value("half_lo", 0.08);
      s.generator.half_hi = g.value("half_hi", 0.15);
      s.generator.center_lo = g.value("center_lo", 0.2);
      s.generator.center_hi = g.value("center_hi", 0.8);
      s.generator.diag_band = g.value("diag_band", 0.45);
    }
  } catch (const json::exception& e) {
    fail(e.what());
  }

  const auto violations = validate_ccqsp(s.ccqsp);
  if (!violations.empty())
    throw ScenarioValidationError("scenario: " + violations.front().rule + " (" +
                                  violations.front().subject + ")");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioParseError("scenario: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ScenarioParseError(std::string("scenario: ") + e.what());
  }
  return parse_scenario(doc);
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["plant"] = plant_to_json(s.model);
  doc["initial"] = {{"mean", from_vector(s.init.mean)}, {"cov", from_matrix(s.init.cov)}};
  if (s.feedback.closed_loop())
    doc["feedback"] = {{"type", "gain"}, {"K", from_matrix(s.feedback.K)}};
  else
    doc["feedback"] = {{"type", "open_loop"}};

  json regions = json::object();
  for (size_t i = 0; i < s.regions.size(); ++i)
    regions[s.region_names[i]] = region_to_json(s.regions[i]);
  doc["regions"] = regions;

  json events = json::array();
  for (const Event& e : s.ccqsp.events) events.push_back(e.name);
  doc["events"] = events;
  doc["end_event"] = s.ccqsp.events[static_cast<size_t>(s.ccqsp.end_event)].name;

  json episodes = json::array();
  for (size_t i = 0; i < s.ccqsp.episodes.size(); ++i) {
    const Episode& e = s.ccqsp.episodes[i];
    const char* kind = e.kind == Episode::StartIn  ? "start_in"
                       : e.kind == Episode::EndIn ? "end_in"
                                                   : "remain_in";
    episodes.push_back({{"name", e.name},
                        {"kind", kind},
                        {"start", s.ccqsp.events[static_cast<size_t>(e.start_event)].name},
                        {"end", s.ccqsp.events[static_cast<size_t>(e.end_event)].name},
                        {"region", s.episode_region[i]}});
  }
  doc["episodes"] = episodes;

  json stcs = json::array();
  for (const TemporalConstraint& t : s.ccqsp.stcs) {
    json tc = {{"from", s.ccqsp.events[static_cast<size_t>(t.from)].name},
               {"to", s.ccqsp.events[static_cast<size_t>(t.to)].name},
               {"lb", t.lb}};
    tc["ub"] = std::isfinite(t.ub) ? json(t.ub) : json(nullptr);
    stcs.push_back(tc);
  }
  doc["stcs"] = stcs;

  json ccs = json::array();
  for (const ChanceConstraint& c : s.ccqsp.chance_constraints) {
    json names = json::array();
    for (int e : c.episodes) names.push_back(s.ccqsp.episodes[static_cast<size_t>(e)].name);
    ccs.push_back({{"name", c.name}, {"episodes", names}, {"delta", c.delta}});
  }
  doc["chance_constraints"] = ccs;

  json pins = json::array();
  for (const MeanEquality& eq : s.pins)
    pins.push_back({{"step", eq.step}, {"H", from_matrix(eq.H)}, {"g", from_vector(eq.g)}});
  doc["pins"] = pins;

  const char* okind = s.objective.kind == Objective::Kind::ManhattanControl ? "manhattan"
                      : s.objective.kind == Objective::Kind::LinearControl  ? "linear"
                      : s.objective.kind == Objective::Kind::QuadraticExpectedControl
                          ? "quadratic"
                          : "end_time";
  doc["objective"] = {{"kind", okind}, {"weight", s.objective.weight}};
  if (s.objective.linear.size() > 0) doc["objective"]["linear"] = from_vector(s.objective.linear);

  if (!s.generator.targets.empty()) {
    json targets = json::array();
    for (const auto& t : s.generator.targets) targets.push_back(t);
    doc["generator"] = {{"targets", targets},       {"count", s.generator.count},
                        {"half_lo", s.generator.half_lo}, {"half_hi", s.generator.half_hi},
                        {"center_lo", s.generator.center_lo},
                        {"center_hi", s.generator.center_hi},
                        {"diag_band", s.generator.diag_band}};
  }
  return doc;
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioParseError("scenario: cannot write '" + path + "'");
  out << scenario_to_json(s).dump(2) << "\n";
}

std::string scenario_hash(const Scenario& s) {
  const std::string bytes = scenario_to_json(s).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Scenario make_instance(const Scenario& base, std::uint64_t seed) {
  Scenario out = base;
  if (base.generator.targets.empty()) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> half(base.generator.half_lo, base.generator.half_hi);
  std::uniform_real_distribution<double> center(base.generator.center_lo,
                                                base.generator.center_hi);
  for (const std::string& target : base.generator.targets) {
    const double hx = half(rng);
    const double hy = half(rng);
    const double cx = center(rng);
    double cy = center(rng);
    while (std::abs(cx - cy) > base.generator.diag_band) cy = center(rng);
    const Region r = obstacle_region(cx - hx, cx + hx, cy - hy, cy + hy, base.model.n_x());
    for (size_t i = 0; i < out.region_names.size(); ++i)
      if (out.region_names[i] == target) out.regions[i] = r;
    for (size_t e = 0; e < out.episode_region.size(); ++e)
      if (out.episode_region[e] == target) out.ccqsp.episodes[e].region = r;
  }
  return out;
}

json plan_to_json(const PlanFile& p) {
  json doc;
  doc["tool"] = p.tool;
  doc["scenario_hash"] = p.scenario_hash;
  doc["config"] = p.config;
  const PlanSolution& sol = p.solution;
  doc["status"] = to_string(sol.status);
  doc["schedule"] = sol.schedule.step;
  // json has no infinity; an unsolved objective becomes null
  doc["objective"] = std::isfinite(sol.objective) ? json(sol.objective) : json(nullptr);
  json controls = json::array();
  for (const auto& u : sol.controls) controls.push_back(from_vector(u));
  doc["controls"] = controls;
  doc["alloc"] = {{"delta", sol.alloc.delta},
                  {"eps", from_matrix(sol.alloc.eps)},
                  {"tcmax", sol.alloc.tcmax}};
  doc["risk_certificate"] = sol.risk_certificate;
  doc["note"] = sol.note;
  doc["nodes_visited"] = sol.nodes_visited;
  doc["leaves_solved"] = sol.leaves_solved;
  doc["pruned"] = sol.pruned;
  return doc;
}

PlanFile parse_plan(const json& doc) {
  PlanFile p;
  try {
    p.tool = require(doc, "tool").get<std::string>();
    p.scenario_hash = require(doc, "scenario_hash").get<std::string>();
    p.config = doc.value("config", json::object());
    PlanSolution& sol = p.solution;
    const std::string status = require(doc, "status").get<std::string>();
    bool known = false;
    for (SolveStatus st : {SolveStatus::Optimal, SolveStatus::Infeasible, SolveStatus::Unbounded,
                           SolveStatus::IterationLimit, SolveStatus::NumericalError}) {
      if (status == to_string(st)) {
        sol.status = st;
        known = true;
      }
    }
    if (!known) fail("unknown status '" + status + "'");
    sol.schedule.step = require(doc, "schedule").get<std::vector<int>>();
    const json& objective = require(doc, "objective");
    sol.objective =
        objective.is_null() ? std::numeric_limits<double>::infinity() : objective.get<double>();
    for (const json& u : require(doc, "controls")) sol.controls.push_back(to_vector(u));
    const json& alloc = require(doc, "alloc");
    sol.alloc.delta = require(alloc, "delta").get<std::vector<std::vector<double>>>();
    sol.alloc.eps = to_matrix(require(alloc, "eps"));
    sol.alloc.tcmax = require(alloc, "tcmax").get<std::vector<int>>();
    sol.risk_certificate = require(doc, "risk_certificate").get<std::vector<double>>();
    sol.note = require(doc, "note").get<std::string>();
    sol.nodes_visited = require(doc, "nodes_visited").get<int>();
    sol.leaves_solved = require(doc, "leaves_solved").get<int>();
    sol.pruned = require(doc, "pruned").get<int>();
  } catch (const json::exception& e) {
    fail(e.what());
  }
  return p;
}

PlanFile load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioParseError("plan: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ScenarioParseError(std::string("plan: ") + e.what());
  }
  return parse_plan(doc);
}

void save_plan(const PlanFile& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioParseError("plan: cannot write '" + path + "'");
  out << plan_to_json(p).dump(2) << "\n";
}

} // namespace psulu
