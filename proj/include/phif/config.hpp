#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phif/discretization.hpp"
#include "phif/solvers.hpp"

namespace phif {

struct SolverSettings {
  std::vector<Method> methods{Method::Phif};
  std::vector<double> eps{1e-3};
  /// Incomplete Cholesky drop tolerances; empty means "same as eps".
  std::vector<double> droptol;
  RunOptions run;
  bool estimate_errors = true;
  double estimate_target = 1e-2;
  int estimate_iters = 64;

  std::vector<PrecondChoice> choices() const;
};

struct OutputSettings {
  std::string dir = ".";
  int dump_every = 0;
  /// CSV destination; empty writes to standard output.
  std::string report;
  bool dump_hierarchy = false;
};

struct ConvergenceSettings {
  std::vector<Index> n;
  double t_final = 0.1;
};

struct Config {
  std::vector<ProblemSpec> problems;
  SolverSettings solver;
  OutputSettings output;
  ConvergenceSettings convergence;
};

/// Line-oriented `key = value` text with [problem], [solver], [output] and [convergence]
/// sections; '#' starts a comment. Each [problem] section adds one spec, starting from the
/// defaults of its `kind`. Throws ConfigError (with the line number) on unknown or
/// duplicate keys, malformed values, a missing `kind`, n != leaf * 2^levels, or
/// non-positive tolerances.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

struct SmokeLimits {
  Index max_n_2d = 64;
  Index max_n_3d = 16;
  int max_steps = 5;
};

/// Shrinks every problem to n <= the per-dimension cap (dropping levels, keeping the leaf),
/// caps nsteps, halves the convergence grids until they fit, and sends output to dir/smoke
/// with the report on standard output.
Config smoke_tier(Config c, const SmokeLimits& limits = {});

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const Config& c);

} // namespace phif
