#include <iostream>

#include "commands.hpp"
#include "hnbr/error.hpp"

int main(int argc, char** argv) {
  using namespace hnbr::cli;
  CLI::App app{"Heterogeneous negative binomial regression with double l1 penalties"};
  app.require_subcommand(1);

  FitArgs fit_args;
  SimulateArgs sim_args;
  TheoryArgs theory_args;
  FixtureArgs fixture_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit a penalized model to a CSV file");
  CLI::App* sim = app.add_subcommand("simulate", "Run a Monte Carlo study");
  CLI::App* theory = app.add_subcommand("theory", "Numerically check a theoretical bound");
  CLI::App* fixture = app.add_subcommand("fixture", "Write a synthetic CSV data set");
  add_fit(*fit, fit_args);
  add_simulate(*sim, sim_args);
  add_theory(*theory, theory_args);
  add_fixture(*fixture, fixture_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) return run_fit(fit_args);
    if (sim->parsed()) return run_simulate(sim_args);
    if (theory->parsed()) return run_theory(theory_args);
    if (fixture->parsed()) return run_fixture(fixture_args);
  } catch (const hnbr::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const hnbr::BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
