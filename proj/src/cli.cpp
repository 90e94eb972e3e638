#include "psulu/cli.hpp"

#include <chrono>
#include <exception>
#include <fstream>
#include <sstream>

namespace psulu {

namespace {

using nlohmann::json;

constexpr const char* kTool = "psulu 0.1.0";

// Scenario ready to solve: generator applied, feedback maybe stripped.
Scenario prepare(const Scenario& base, std::uint64_t seed, bool open_loop) {
  Scenario s = base.generator.targets.empty() ? base : make_instance(base, seed);
  if (open_loop) s.feedback = {};
  return s;
}

int load_or_fail(const std::string& path, Scenario& out, std::ostream& log) {
  try {
    out = load_scenario(path);
  } catch (const ScenarioValidationError& e) {
    log << e.what() << "\n";
    return kValidationError;
  } catch (const ScenarioParseError& e) {
    log << e.what() << "\n";
    return kParseError;
  }
  return kOk;
}

struct GridSpec {
  std::vector<double> deltas; // empty means keep the scenario budgets
  std::vector<std::string> methods;
  int instances = 0; // 0 picks the generator default
};

GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  std::stringstream items(text);
  std::string item;
  while (std::getline(items, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ScenarioParseError("sweep: grid item needs key=value");
    const std::string key = item.substr(0, eq);
    std::stringstream values(item.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, ',')) {
      if (key == "delta") {
        if (v != "scenario") g.deltas.push_back(std::stod(v));
      } else if (key == "method") {
        if (v != "nira-open" && v != "nira-closed" && v != "fixed")
          throw ScenarioParseError("sweep: unknown method '" + v + "'");
        g.methods.push_back(v);
      } else if (key == "instances") {
        g.instances = std::stoi(v);
      } else {
        throw ScenarioParseError("sweep: unknown grid key '" + key + "'");
      }
    }
  }
  if (g.methods.empty()) g.methods.push_back("nira-open");
  return g;
}

void format_cell(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

} // namespace

json validation_to_json(const ValidationReport& rep) {
  json doc;
  doc["samples"] = rep.samples;
  doc["seed"] = rep.seed;
  doc["pass"] = rep.pass();
  doc["expected_cost"] = rep.expected_cost;
  json ccs = json::array();
  for (const auto& cc : rep.per_cc)
    ccs.push_back({{"name", cc.name},
                   {"delta", cc.delta},
                   {"violations", cc.violations},
                   {"p_fail", cc.p_fail},
                   {"wilson", {cc.wilson_lo, cc.wilson_hi}},
                   {"pass", cc.pass}});
  doc["chance_constraints"] = ccs;
  doc["saturation_freq"] = rep.saturation_freq;
  return doc;
}

int run_plan(const PlanArgs& args, std::ostream& log) {
  Scenario base;
  if (const int rc = load_or_fail(args.scenario, base, log); rc != kOk) return rc;
  const Scenario s = prepare(base, args.seed, args.open_loop);

  Config cfg;
  cfg.fixed_risk = args.fixed_risk;
  PlanSolution sol;
  try {
    sol = psulu_plan(s.ccqsp, s.model, s.feedback, s.init, s.objective, s.pins, cfg);
  } catch (const std::invalid_argument& e) {
    log << "plan: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    log << "plan: solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }

  if (!args.out.empty()) {
    PlanFile file;
    file.tool = kTool;
    file.scenario_hash = scenario_hash(s);
    file.config = {{"seed", args.seed},
                   {"fixed_risk", args.fixed_risk},
                   {"open_loop", args.open_loop}};
    file.solution = sol;
    save_plan(file, args.out);
  }

  if (sol.optimal()) {
    log << "plan: optimal, objective " << sol.objective << ", schedule [";
    for (size_t e = 0; e < sol.schedule.step.size(); ++e)
      log << (e ? " " : "") << sol.schedule.step[e];
    log << "], nodes " << sol.nodes_visited << "\n";
    if (!args.svg.empty()) write_svg(args.svg, s, sol);
    if (!args.csv.empty()) write_csv(args.csv, s, sol);
    return kOk;
  }
  if (sol.status == SolveStatus::Infeasible) {
    log << "plan: infeasible: " << sol.note << "\n";
    return kInfeasible;
  }
  log << "plan: solver failure: " << sol.note << "\n";
  return kSolverFailure;
}

int run_validate(const ValidateArgs& args, std::ostream& log) {
  PlanFile plan;
  try {
    plan = load_plan(args.plan);
  } catch (const ScenarioParseError& e) {
    log << e.what() << "\n";
    return kParseError;
  }
  Scenario base;
  if (const int rc = load_or_fail(args.scenario, base, log); rc != kOk) return rc;
  const Scenario s = prepare(base, plan.config.value("seed", std::uint64_t{0}),
                             plan.config.value("open_loop", false));

  if (plan.scenario_hash != scenario_hash(s)) {
    log << "validate: plan was produced from a different scenario (hash "
        << plan.scenario_hash << " vs " << scenario_hash(s) << ")\n";
    return kValidationError;
  }
  if (!plan.solution.optimal()) {
    log << "validate: plan is not solved (" << to_string(plan.solution.status) << ")\n";
    return kInfeasible;
  }

  SimulationConfig cfg;
  cfg.samples = args.samples;
  cfg.seed = args.seed;
  ValidationReport rep;
  try {
    rep = estimate_pfail(plan.solution, s.ccqsp, s.model, s.feedback, s.init, s.objective, cfg);
  } catch (const std::exception& e) {
    log << "validate: " << e.what() << "\n";
    return kSolverFailure;
  }

  if (!args.report.empty()) {
    std::ofstream out(args.report);
    if (!out) {
      log << "validate: cannot write '" << args.report << "'\n";
      return kSolverFailure;
    }
    out << validation_to_json(rep).dump(2) << "\n";
  }
  for (const auto& cc : rep.per_cc)
    log << "validate: " << cc.name << " p_fail " << cc.p_fail << " in [" << cc.wilson_lo << ", "
        << cc.wilson_hi << "] vs delta " << cc.delta << (cc.pass ? " ok" : " EXCEEDED") << "\n";
  return rep.pass() ? kOk : kInfeasible;
}

int run_sweep(const SweepArgs& args, std::ostream& log) {
  Scenario base;
  if (const int rc = load_or_fail(args.scenario, base, log); rc != kOk) return rc;
  GridSpec grid;
  try {
    grid = parse_grid(args.grid);
  } catch (const ScenarioParseError& e) {
    log << e.what() << "\n";
    return kParseError;
  }
  int instances = grid.instances;
  if (instances <= 0) instances = base.generator.targets.empty() ? 1 : base.generator.count;

  std::ofstream out(args.out);
  if (!out) {
    log << "sweep: cannot write '" << args.out << "'\n";
    return kSolverFailure;
  }
  out << "instance,method,delta,status,cost,p_fail,runtime_s,nodes\n";

  for (int i = 0; i < instances; ++i) {
    for (const std::string& method : grid.methods) {
      const bool open = method != "nira-closed";
      Scenario s = prepare(base, args.seed + static_cast<std::uint64_t>(i), open);
      Config cfg;
      cfg.fixed_risk = method == "fixed";

      std::vector<double> deltas = grid.deltas;
      if (deltas.empty()) deltas.push_back(-1.0); // sentinel: keep the file budgets
      for (double delta : deltas) {
        Scenario run = s;
        if (delta > 0.0)
          for (auto& cc : run.ccqsp.chance_constraints) cc.delta = delta;

        const auto t0 = std::chrono::steady_clock::now();
        PlanSolution sol;
        std::string status;
        try {
          sol = psulu_plan(run.ccqsp, run.model, run.feedback, run.init, run.objective,
                           run.pins, cfg);
          status = to_string(sol.status);
        } catch (const std::exception&) {
          status = "error";
        }
        const double runtime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        double p_fail = std::numeric_limits<double>::quiet_NaN();
        if (sol.optimal()) {
          SimulationConfig mc;
          mc.samples = args.samples;
          mc.seed = args.seed + 1000003u * static_cast<std::uint64_t>(i + 1);
          const ValidationReport rep =
              estimate_pfail(sol, run.ccqsp, run.model, run.feedback, run.init, run.objective, mc);
          p_fail = 0.0;
          for (const auto& cc : rep.per_cc) p_fail = std::max(p_fail, cc.p_fail);
        }

        char delta_cell[32];
        std::snprintf(delta_cell, sizeof(delta_cell), "%g", delta > 0.0 ? delta : -1.0);
        out << i << "," << method << "," << delta_cell << "," << status << ",";
        format_cell(out, sol.objective);
        out << ",";
        format_cell(out, p_fail);
        out << ",";
        format_cell(out, runtime);
        out << "," << sol.nodes_visited << "\n";
        log << "sweep: instance " << i << " " << method << " delta "
            << (delta > 0.0 ? std::to_string(delta) : std::string("scenario")) << " -> " << status
            << "\n";
      }
    }
  }
  return kOk;
}

} // namespace psulu
