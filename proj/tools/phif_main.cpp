#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "phif/bench.hpp"
#include "phif/config.hpp"

namespace fs = std::filesystem;
using namespace phif;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << text;
}

const ProblemSpec& pick(const Config& c, const std::string& id) {
  if (c.problems.empty())
    throw ConfigError("config has no [problem] section");
  if (id.empty())
    return c.problems.front();
  for (const auto& p : c.problems)
    if (p.id == id)
      return p;
  throw ConfigError("no problem with id '" + id + "'");
}

int cmd_bench(const Config& c) {
  const auto rows = run_bench(c.problems, c.solver, worker_slots_from_env(), &std::cerr);
  write_text(c.output.report, bench_csv(rows));
  return 0;
}

int cmd_converge(const Config& c, const std::string& id) {
  if (c.convergence.n.empty())
    throw ConfigError("converge needs a [convergence] section with n = ...");
  const auto r = run_convergence(pick(c, id), c.convergence, c.solver);
  write_text(c.output.report, convergence_csv(r));
  if (r.manufactured_slope)
    std::cerr << "manufactured slope " << *r.manufactured_slope << '\n';
  if (r.self_slope)
    std::cerr << "self-convergence slope " << *r.self_slope << '\n';
  return 0;
}

int cmd_solve(const Config& c, const std::string& id) {
  const ProblemSpec& spec = pick(c, id);
  const auto choices = c.solver.choices();
  const AssembledProblem problem = assemble_problem(spec);
  const BuiltPreconditioner P = build_preconditioner(problem, choices.front());
  RunOptions opts = c.solver.run;
  opts.snapshot_every = c.output.dump_every;
  const TimeSeries ts = crank_nicolson(problem, P, opts);

  const fs::path dir = c.output.dir;
  fs::create_directories(dir);
  for (const auto& [step, u] : ts.snapshots) {
    char name[64];
    std::snprintf(name, sizeof name, "_step%06d.f64", step);
    dump_field(u, spec.grid, dir / (spec.id + name), step * spec.dt());
  }
  char name[64];
  std::snprintf(name, sizeof name, "_step%06d.f64", spec.nsteps);
  dump_field(ts.u, spec.grid, dir / (spec.id + name), spec.nsteps * spec.dt());
  write_plot_script(dir);
  std::cerr << spec.id << ": N " << spec.grid.num_dofs() << ", " << to_string(choices.front().method)
            << ", mean iterations " << ts.mean_iterations() << ", max u " << ts.u.maxCoeff() << ", fields in "
            << dir.string() << '\n';
  return 0;
}

int cmd_info(const Config& c) {
  std::cout << format_config(c);
  if (c.output.dump_hierarchy) {
    fs::create_directories(c.output.dir);
    for (const auto& p : c.problems) {
      const fs::path path = fs::path(c.output.dir) / (p.id + ".hierarchy.txt");
      std::ofstream out(path);
      if (!out)
        throw std::runtime_error("cannot write " + path.string());
      build_hierarchy(p.grid).dump(out);
      std::cerr << "hierarchy written to " << path.string() << '\n';
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"PHIF-preconditioned parabolic solver toolkit"};
  app.require_subcommand(1);
  std::string config_path, problem_id;
  bool smoke = false;
  app.add_flag("--smoke", smoke, "shrink every problem to n <= 64 (2D) / 16 (3D) and at most 5 steps");
  auto add = [&](const char* name, const char* help, bool takes_id) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "configuration file")->required();
    if (takes_id)
      sub->add_option("--problem", problem_id, "problem id (default: first [problem])");
    return sub;
  };
  auto* bench = add("bench", "run every problem x preconditioner and write the CSV table", false);
  auto* converge = add("converge", "refinement study: (n, dt, error) CSV and fitted slopes", true);
  auto* solve = add("solve", "single run with field dumps", true);
  auto* info = add("info", "print the parsed configuration", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    const Config c = smoke ? smoke_tier(load_config(config_path)) : load_config(config_path);
    if (bench->parsed())
      return cmd_bench(c);
    if (converge->parsed())
      return cmd_converge(c, problem_id);
    if (solve->parsed())
      return cmd_solve(c, problem_id);
    if (info->parsed())
      return cmd_info(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 1;
  } catch (const SpdError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
