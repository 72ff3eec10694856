#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace hnbr::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kData = 3,
  kNotConverged = 4,
  kBudget = 5,
};

struct FitArgs {
  std::string data;
  std::string response = "y";
  std::vector<std::string> features;
  std::string delimiter = ",";
  bool no_header = false;
  double lambda1 = -1.0;
  double lambda2 = -1.0;
  bool auto_grid = false;
  double tol = 1e-8;
  int max_iter = 10000;
  std::uint64_t seed = 0;
  std::string out = "fit.json";
  bool intercept = false;
  bool standardize = false;
  int threads = 1;
  bool no_warm_start = false;
  int extra_starts = 1;
  int ladder = 20;
  double min_ratio = 0.01;
  std::string timestamp;
  bool quiet = false;
};

struct SimulateArgs {
  std::string scenario = "example1";
  long n = 400;
  long p = 3;
  double rho = 0.0;
  int reps = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = "simulation.json";
  int ladder = 20;
  double min_ratio = 0.01;
  bool quiet = false;
};

struct TheoryArgs {
  std::string check;
  std::uint64_t seed = 1;
  int trials = 0;  // 0 = per-check default
  long n = 0;
  long p = 0;
  int reps = 10;
  std::vector<std::string> inputs;
  std::string out = "theory.json";
  bool quiet = false;
};

struct FixtureArgs {
  std::string kind = "health";
  long n = 500;
  long p = 100;
  std::uint64_t seed = 1;
  std::string out = "fixture.csv";
};

void add_fit(CLI::App& app, FitArgs& a);
void add_simulate(CLI::App& app, SimulateArgs& a);
void add_theory(CLI::App& app, TheoryArgs& a);
void add_fixture(CLI::App& app, FixtureArgs& a);

int run_fit(const FitArgs& a);
int run_simulate(const SimulateArgs& a);
int run_theory(const TheoryArgs& a);
int run_fixture(const FixtureArgs& a);

}  // namespace hnbr::cli
