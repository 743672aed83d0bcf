// Batch front end.
//
//   maxcoord run <file.json> [--dt DT] [--steps N] [--tol TOL] [--out PATH] [--format csv|json]
//   maxcoord scenario <name> [same flags] [--save-mechanism PATH]
//
// Exit codes: 0 success, 1 bad input, 2 solver failure (partial trajectory
// still written), 3 I/O error.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "maxcoord/maxcoord.hpp"

namespace {

struct Args {
  std::string input;
  std::optional<double> dt;
  std::optional<int> steps;
  std::optional<double> tol;
  std::string out = "-";
  std::string format = "csv";
  std::string save_mechanism;
};

void emit(const maxcoord::TrajectoryRecord& rec, const Args& a) {
  const auto fmt = maxcoord::trajectory_format_from_name(a.format);
  if (a.out == "-")
    std::cout << maxcoord::format_trajectory(rec, fmt);
  else
    maxcoord::write_trajectory(rec, fmt, a.out);
}

int run(maxcoord::MechanismFile file, const Args& a) {
  auto opt = file.defaults;
  if (a.dt) opt.dt = *a.dt;
  if (a.steps) opt.steps = *a.steps;
  if (a.tol) opt.solve.tol = *a.tol;
  if (!a.save_mechanism.empty()) maxcoord::save_mechanism(file, a.save_mechanism);
  try {
    const auto rec = maxcoord::simulate(file.mechanism, file.states, opt);
    emit(rec, a);
    std::cerr << "maxcoord: " << opt.steps << " steps, max |g| " << rec.max_constraint_violation() << "\n";
    return 0;
  } catch (const maxcoord::StepFailure& e) {
    emit(e.partial(), a);
    std::cerr << "maxcoord: solver failed at " << e.what() << " (" << e.partial().rows.size()
              << " rows written)\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximal-coordinate multibody simulator"};
  app.require_subcommand(1);
  Args a;
  auto common = [&a](CLI::App* c) {
    c->add_option("--dt", a.dt, "time step [s]")->check(CLI::PositiveNumber);
    c->add_option("--steps", a.steps, "number of steps")->check(CLI::NonNegativeNumber);
    c->add_option("--tol", a.tol, "solver tolerance")->check(CLI::PositiveNumber);
    c->add_option("--out", a.out, "output path, - for stdout");
    c->add_option("--format", a.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    c->add_option("--save-mechanism", a.save_mechanism, "write the mechanism file used");
  };
  auto* run_cmd = app.add_subcommand("run", "simulate a mechanism file");
  run_cmd->add_option("file", a.input, "mechanism file")->required();
  common(run_cmd);
  auto* scen_cmd = app.add_subcommand("scenario", "simulate a bundled scenario");
  scen_cmd->add_option("name", a.input, "e.g. double-pendulum, sphere-chain(3), nlink-pendulum:5:spherical")
      ->required();
  common(scen_cmd);
  auto* list_cmd = app.add_subcommand("list", "print the scenario names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (list_cmd->parsed()) {
      for (const auto& n : maxcoord::scenario_names()) std::cout << n << "\n";
      return 0;
    }
    if (run_cmd->parsed()) return run(maxcoord::load_mechanism(a.input), a);
    return run(maxcoord::make_scenario(a.input), a);
  } catch (const maxcoord::IoError& e) {
    std::cerr << "maxcoord: " << e.path() << ": " << e.what() << "\n";
    return 3;
  } catch (const maxcoord::Error& e) {
    std::cerr << "maxcoord: " << e.what() << "\n";
    return 1;
  }
}
