#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "psulu/cli.hpp"

namespace {

// PSULU_LOG=quiet silences the progress lines; outputs still get written.
struct NullBuf : std::streambuf {
  int overflow(int c) override { return c; }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-bounded trajectory and schedule planning for stochastic linear systems"};
  app.require_subcommand(1);

  psulu::PlanArgs plan_args;
  CLI::App* plan = app.add_subcommand("plan", "solve a scenario");
  plan->add_option("scenario", plan_args.scenario, "scenario JSON file")->required();
  plan->add_option("--out", plan_args.out, "write the plan JSON here");
  plan->add_option("--svg", plan_args.svg, "render the nominal plan as SVG");
  plan->add_option("--csv", plan_args.csv, "write the trajectory table as CSV");
  plan->add_flag("--fixed-risk", plan_args.fixed_risk,
                 "hold the uniform risk allocation fixed (baseline mode)");
  plan->add_flag("--open-loop", plan_args.open_loop, "ignore the scenario's feedback gain");
  plan->add_option("--seed", plan_args.seed, "instance seed for generator scenarios");

  psulu::ValidateArgs val_args;
  CLI::App* validate = app.add_subcommand("validate", "check a plan by simulation");
  validate->add_option("plan", val_args.plan, "plan JSON file")->required();
  validate->add_option("scenario", val_args.scenario, "scenario JSON file")->required();
  validate->add_option("--samples", val_args.samples, "simulation sample count");
  validate->add_option("--seed", val_args.seed, "simulation seed");
  validate->add_option("--report", val_args.report, "write the report JSON here");

  psulu::SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "grid of planning runs to CSV");
  sweep->add_option("scenario", sweep_args.scenario, "scenario JSON file")->required();
  sweep->add_option("--grid", sweep_args.grid,
                    "delta=...;method=nira-open,nira-closed,fixed;instances=N")
      ->required();
  sweep->add_option("--out", sweep_args.out, "CSV output path")->required();
  sweep->add_option("--seed", sweep_args.seed, "master seed");
  sweep->add_option("--samples", sweep_args.samples, "validation samples per row");

  CLI11_PARSE(app, argc, argv);

  NullBuf null_buf;
  std::ostream null_log(&null_buf);
  const char* level = std::getenv("PSULU_LOG");
  std::ostream& log = (level && std::string(level) == "quiet") ? null_log : std::cout;

  if (plan->parsed()) return psulu::run_plan(plan_args, log);
  if (validate->parsed()) return psulu::run_validate(val_args, log);
  return psulu::run_sweep(sweep_args, log);
}
