#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phif/config.hpp"
#include "phif/solvers.hpp"

namespace phif {

/// CSV schema, version 1.
inline constexpr std::string_view kBenchCsvHeader =
    "problem,N,method,eps,mem_bytes,e_a,e_s,n_i_mean,factor_s,solve_s,warm_start,seed";

std::string csv_row(const RunReport& r);
std::string bench_csv(const std::vector<RunReport>& rows);

/// One row per (spec, preconditioner choice), in spec-major order. Runs execute in up to
/// `workers` threads; rows do not depend on the worker count. Failures are rethrown with
/// the problem id prepended. `log` receives one progress line per finished run.
std::vector<RunReport> run_bench(const std::vector<ProblemSpec>& specs, const SolverSettings& settings,
                                 int workers = 1, std::ostream* log = nullptr);

/// PHIF_WORKERS, or 1 when unset or malformed.
int worker_slots_from_env();

struct ConvergencePoint {
  Index n = 0;
  double dt = 0.0;
  double error = 0.0;
};

struct ConvergenceResult {
  /// Max-norm error against the exact solution; only for a == 1, sine data, no reaction.
  std::vector<ConvergencePoint> manufactured;
  /// Max-norm difference from the finest run, restricted to coincident nodes.
  std::vector<ConvergencePoint> self;
  std::optional<double> manufactured_slope;
  std::optional<double> self_slope;
};

/// Runs `base` on each n of `conv` (n = leaf * 2^k with the base leaf), with
/// dt = dt_factor h and t_final / dt steps, which must be an integer.
ConvergenceResult run_convergence(const ProblemSpec& base, const ConvergenceSettings& conv,
                                  const SolverSettings& settings);

/// Columns: reference,n,dt,error.
std::string convergence_csv(const ConvergenceResult& r);

/// Least-squares slope of log(error) against log(h = 1/n); points with zero error are skipped.
std::optional<double> fit_slope(const std::vector<ConvergencePoint>& pts);

struct FieldDump {
  int dim = 2;
  Index n = 0;
  double time = 0.0;
  double min = 0.0;
  double max = 0.0;
  Vector u;
};

/// Little-endian f64 values in DOF order at `path`, plus a text sidecar `path`.txt
/// with dim, n, time, min and max.
void dump_field(const Vector& u, const GridSpec& grid, const std::filesystem::path& path, double time = 0.0);
FieldDump read_field(const std::filesystem::path& path);

/// Writes plot_fields.py next to the dumps; it only needs numpy and matplotlib.
void write_plot_script(const std::filesystem::path& dir);

} // namespace phif
