#include "phif/bench.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "phif/diagnostics.hpp"

namespace phif {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Rethrows the active exception with `prefix` prepended, keeping its category.
[[noreturn]] void rethrow_with(const std::string& prefix) {
  try {
    throw;
  } catch (const SpdError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunReport run_one(const AssembledProblem& problem, const PrecondChoice& choice, const SolverSettings& s) {
  const auto t0 = std::chrono::steady_clock::now();
  const BuiltPreconditioner P = build_preconditioner(problem, choice);
  const double factor_seconds = seconds_since(t0);

  RunReport r;
  r.problem = problem.spec.id;
  r.N = problem.spec.grid.num_dofs();
  r.method = choice.method;
  r.tolerance = choice.method == Method::None ? 0.0 : choice.tolerance;
  r.mem_bytes = P.memory_bytes();
  r.factor_seconds = factor_seconds;
  r.warm_start = s.run.warm_start;
  r.seed = problem.spec.seed;
  if (P.phif && s.estimate_errors) {
    r.e_a = est_e_a(problem.cn.A, *P.phif, s.estimate_target, s.estimate_iters, problem.spec.seed).value;
    r.e_s = est_e_s(problem.cn.A, *P.phif, s.estimate_target, s.estimate_iters, problem.spec.seed).value;
  }
  const TimeSeries ts = crank_nicolson(problem, P, s.run);
  r.n_i_mean = ts.mean_iterations();
  r.solve_seconds = ts.solve_seconds;
  r.converged = ts.all_converged;
  return r;
}

} // namespace

std::string csv_row(const RunReport& r) {
  std::string s;
  s += r.problem;
  s += ',' + std::to_string(r.N);
  s += ',' + std::string(to_string(r.method));
  s += ',' + (r.method == Method::None ? std::string() : fmt("%g", r.tolerance));
  s += ',' + std::to_string(r.mem_bytes);
  s += ',' + (r.e_a ? fmt("%.4e", *r.e_a) : std::string());
  s += ',' + (r.e_s ? fmt("%.4e", *r.e_s) : std::string());
  s += ',' + fmt("%.4f", r.n_i_mean);
  s += ',' + fmt("%.4f", r.factor_seconds);
  s += ',' + fmt("%.4f", r.solve_seconds);
  s += ',' + std::string(r.warm_start ? "1" : "0");
  s += ',' + std::to_string(r.seed);
  return s;
}

std::string bench_csv(const std::vector<RunReport>& rows) {
  std::string out(kBenchCsvHeader);
  out += '\n';
  for (const auto& r : rows)
    out += csv_row(r) + '\n';
  return out;
}

int worker_slots_from_env() {
  const char* v = std::getenv("PHIF_WORKERS");
  if (!v)
    return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1 || n > 256)
    return 1;
  return static_cast<int>(n);
}

std::vector<RunReport> run_bench(const std::vector<ProblemSpec>& specs, const SolverSettings& settings, int workers,
                                 std::ostream* log) {
  const auto choices = settings.choices();
  std::vector<RunReport> rows(specs.size() * choices.size());
  std::mutex log_mutex;

  for (std::size_t si = 0; si < specs.size(); ++si) {
    std::optional<AssembledProblem> problem;
    try {
      problem = assemble_problem(specs[si]);
    } catch (...) {
      rethrow_with(specs[si].id + ": ");
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(choices.size());
    auto worker = [&] {
      for (std::size_t ci; (ci = next.fetch_add(1)) < choices.size();) {
        try {
          rows[si * choices.size() + ci] = run_one(*problem, choices[ci], settings);
          if (log) {
            std::lock_guard lock(log_mutex);
            const auto& r = rows[si * choices.size() + ci];
            *log << r.problem << ' ' << to_string(r.method) << ' ' << fmt("%g", r.tolerance) << ": n_i "
                 << fmt("%.2f", r.n_i_mean) << ", factor " << fmt("%.2f", r.factor_seconds) << " s, solve "
                 << fmt("%.2f", r.solve_seconds) << " s\n";
          }
        } catch (...) {
          errors[ci] = std::current_exception();
        }
      }
    };
    const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(choices.size())));
    if (nthreads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < nthreads; ++t)
        pool.emplace_back(worker);
      for (auto& t : pool)
        t.join();
    }
    for (std::size_t ci = 0; ci < choices.size(); ++ci) {
      if (errors[ci]) {
        try {
          std::rethrow_exception(errors[ci]);
        } catch (...) {
          rethrow_with(specs[si].id + " (" + to_string(choices[ci].method) + "): ");
        }
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::optional<double> fit_slope(const std::vector<ConvergencePoint>& pts) {
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : pts)
    if (p.error > 0.0 && std::isfinite(p.error))
      xy.emplace_back(std::log(1.0 / static_cast<double>(p.n)), std::log(p.error));
  if (xy.size() < 2)
    return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0)
    return std::nullopt;
  return sxy / sxx;
}

ConvergenceResult run_convergence(const ProblemSpec& base, const ConvergenceSettings& conv,
                                  const SolverSettings& settings) {
  if (conv.n.size() < 3)
    throw InvalidArgument("run_convergence: need at least 3 refinement levels");
  const auto choices = settings.choices();
  if (choices.empty())
    throw InvalidArgument("run_convergence: no preconditioner configured");
  const Index leaf = base.grid.leaf;

  struct Run {
    ProblemSpec spec;
    Vector u;
  };
  std::vector<Run> runs;
  for (Index n : conv.n) {
    if (n % leaf != 0 || !std::has_single_bit(static_cast<std::uint32_t>(n / leaf)))
      throw InvalidArgument("run_convergence: n = " + std::to_string(n) + " is not leaf * 2^k for leaf = " +
                            std::to_string(leaf));
    ProblemSpec s = base;
    s.grid = GridSpec::make(base.grid.dim, std::countr_zero(static_cast<std::uint32_t>(n / leaf)), leaf);
    const double steps = conv.t_final / s.dt();
    const double rounded = std::round(steps);
    if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps))
      throw InvalidArgument("run_convergence: t_final / dt = " + std::to_string(steps) + " is not an integer at n = " +
                            std::to_string(n));
    s.nsteps = static_cast<int>(rounded);
    s.id = base.id + "-n" + std::to_string(n);
    RunOutcome out = crank_nicolson_run(s, choices.front(), settings.run);
    runs.push_back({s, std::move(out.u_final)});
  }

  ConvergenceResult result;
  const bool manufactured = base.coeff.kind == CoeffSpec::Kind::Constant && base.coeff.value == 1.0 &&
                            base.init.kind == InitialCondition::Kind::Sine && base.init.amplitude == 1.0 &&
                            base.reaction.kind == Reaction::Kind::None;
  if (manufactured) {
    for (const auto& r : runs) {
      const Vector exact = manufactured_heat_solution(r.spec.grid, CoeffField::constant(1.0), conv.t_final);
      result.manufactured.push_back({r.spec.grid.n, r.spec.dt(), (r.u - exact).lpNorm<Eigen::Infinity>()});
    }
    result.manufactured_slope = fit_slope(result.manufactured);
  }

  std::size_t finest = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].spec.grid.n > runs[finest].spec.grid.n)
      finest = i;
  const auto& ref = runs[finest];
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i == finest)
      continue;
    const auto& g = runs[i].spec.grid;
    const Index ratio = ref.spec.grid.n / g.n;
    if (ratio * g.n != ref.spec.grid.n)
      throw InvalidArgument("run_convergence: grids do not nest");
    double err = 0.0;
    for (Index j = 0; j < g.num_dofs(); ++j) {
      auto c = g.coords(j);
      for (int a = 0; a < g.dim; ++a)
        c[static_cast<std::size_t>(a)] *= ratio;
      const Index jf = ref.spec.grid.dof(std::span<const Index>(c.data(), static_cast<std::size_t>(g.dim)));
      err = std::max(err, std::abs(runs[i].u[j] - ref.u[jf]));
    }
    result.self.push_back({g.n, runs[i].spec.dt(), err});
  }
  result.self_slope = fit_slope(result.self);
  return result;
}

std::string convergence_csv(const ConvergenceResult& r) {
  std::string out = "reference,n,dt,error\n";
  auto emit = [&](const char* ref, const std::vector<ConvergencePoint>& pts) {
    for (const auto& p : pts)
      out += std::string(ref) + ',' + std::to_string(p.n) + ',' + fmt("%.10g", p.dt) + ',' + fmt("%.10e", p.error) +
             '\n';
  };
  emit("manufactured", r.manufactured);
  emit("self", r.self);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return __builtin_bswap64(v);
  return v;
}

std::filesystem::path sidecar(const std::filesystem::path& p) {
  auto s = p;
  s += ".txt";
  return s;
}

} // namespace

void dump_field(const Vector& u, const GridSpec& grid, const std::filesystem::path& path, double time) {
  if (u.size() != grid.num_dofs())
    throw InvalidArgument("dump_field: vector length does not match the grid");
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("dump_field: cannot open " + path.string());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(u[i]));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out)
    throw std::runtime_error("dump_field: write failed for " + path.string());

  std::ofstream side(sidecar(path));
  if (!side)
    throw std::runtime_error("dump_field: cannot open " + sidecar(path).string());
  side << "dim " << grid.dim << "\nn " << grid.n << "\ntime " << fmt("%.17g", time) << "\nmin "
       << fmt("%.17g", u.size() ? u.minCoeff() : 0.0) << "\nmax " << fmt("%.17g", u.size() ? u.maxCoeff() : 0.0)
       << "\nformat f64le\n";
  if (!side)
    throw std::runtime_error("dump_field: write failed for " + sidecar(path).string());
}

FieldDump read_field(const std::filesystem::path& path) {
  FieldDump d;
  std::ifstream side(sidecar(path));
  if (!side)
    throw std::runtime_error("read_field: cannot open " + sidecar(path).string());
  for (std::string key; side >> key;) {
    if (key == "dim")
      side >> d.dim;
    else if (key == "n")
      side >> d.n;
    else if (key == "time")
      side >> d.time;
    else if (key == "min")
      side >> d.min;
    else if (key == "max")
      side >> d.max;
    else
      side >> key;
  }
  if ((d.dim != 2 && d.dim != 3) || d.n < 2)
    throw std::runtime_error("read_field: malformed sidecar " + sidecar(path).string());
  Index count = 1;
  for (int a = 0; a < d.dim; ++a)
    count *= d.n - 1;
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("read_field: cannot open " + path.string());
  d.u.resize(count);
  for (Index i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    d.u[i] = std::bit_cast<double>(to_le(bits));
  }
  if (!in || in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("read_field: size mismatch in " + path.string());
  return d;
}

void write_plot_script(const std::filesystem::path& dir) {
  std::ofstream out(dir / "plot_fields.py");
  if (!out)
    throw std::runtime_error("write_plot_script: cannot write to " + dir.string());
  out << R"(#!/usr/bin/env python3
# Renders every *.f64 field dump in this directory (2D directly, 3D as the mid z-slice).
import glob, sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

for raw in sorted(glob.glob("*.f64")):
    meta = dict(line.split() for line in open(raw + ".txt") if line.strip())
    dim, n = int(meta["dim"]), int(meta["n"])
    u = np.fromfile(raw, dtype="<f8").reshape((n - 1,) * dim)
    if dim == 3:
        u = u[(n - 1) // 2]
    plt.figure(figsize=(5, 4))
    plt.imshow(u, origin="lower", extent=(0, 1, 0, 1))
    plt.colorbar()
    plt.title("%s  t=%s" % (raw, meta["time"]))
    plt.savefig(raw[:-4] + ".png", dpi=120)
    plt.close()
    print(raw[:-4] + ".png", file=sys.stderr)
)";
}

} // namespace phif
