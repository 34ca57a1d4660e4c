#include <doctest.h>

#include <bit>
#include <chrono>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "phif/bench.hpp"
#include "phif/config.hpp"

using namespace phif;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "phif_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV text with the factor_s and solve_s columns removed.
std::string without_timings(const std::string& csv) {
  std::istringstream in(csv);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');)
      cols.push_back(c);
    REQUIRE(cols.size() == 12);
    cols.erase(cols.begin() + 8, cols.begin() + 10);
    for (const auto& c : cols)
      out += c + ',';
    out += '\n';
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PHIF_CLI) + " " + args + " > " + scratch("cli.out").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("minimal heat2d config fills defaults") {
  const auto c = parse_config("[problem]\nkind = heat2d\nn = 16\n");
  REQUIRE(c.problems.size() == 1);
  const auto& p = c.problems[0];
  CHECK(p.grid.n == 16);
  CHECK(p.grid.leaf == 8);
  CHECK(p.grid.levels == 1);
  CHECK(p.id == "heat2d-n16");
  CHECK(p.init.kind == InitialCondition::Kind::TwoGaussians);
  CHECK(p.coeff.count == 100);
  CHECK(p.nsteps == 100);
  CHECK(c.solver.run.tol == 1e-12);
  CHECK(c.solver.run.warm_start);
}

TEST_CASE("logistic reaction parameters") {
  const auto c = parse_config("[problem]\nkind = logistic2d\nn = 32\nreaction.k1 = 1\nreaction.k2 = 10\n");
  CHECK(c.problems[0].reaction.kind == Reaction::Kind::Logistic);
  CHECK(c.problems[0].reaction.k1 == 1.0);
  CHECK(c.problems[0].reaction.k2 == 10.0);
}

TEST_CASE("grid divisibility") {
  const auto c = parse_config("[problem]\nkind = heat2d\nn = 24\nlevels = 3\nleaf = 3\n");
  CHECK(c.problems[0].grid.n == 24);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = 24\nlevels = 2\nleaf = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = 20\n"), ConfigError);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = 16\ncoef.m = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nn = 16\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = 16\n[solver]\ntol = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = 16\n[solver]\neps = 1e-3, -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = 16\nn = 32\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[widgets]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = heat2d\nn = sixteen\n"), ConfigError);
  try {
    parse_config("# comment\n[problem]\nkind = heat2d\n\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("format round trip") {
  const auto c = load_config(fs::path(PHIF_CONFIG_DIR) / "smoke.cfg");
  const std::string once = format_config(c);
  CHECK(format_config(parse_config(once)) == once);
  auto d = parse_config(once);
  REQUIRE(d.problems.size() == c.problems.size());
  for (std::size_t i = 0; i < c.problems.size(); ++i) {
    CHECK(d.problems[i].id == c.problems[i].id);
    CHECK(d.problems[i].dt() == c.problems[i].dt());
    CHECK(d.problems[i].init.amplitude == c.problems[i].init.amplitude);
  }
}

TEST_CASE("CSV schema") {
  CHECK(kBenchCsvHeader == "problem,N,method,eps,mem_bytes,e_a,e_s,n_i_mean,factor_s,solve_s,warm_start,seed");
  CHECK(bench_csv(run_bench({}, SolverSettings{})) == std::string(kBenchCsvHeader) + "\n");
  RunReport r;
  r.problem = "p";
  r.N = 9;
  r.method = Method::Phif;
  r.tolerance = 1e-3;
  r.mem_bytes = 100;
  r.e_a = 1.5e-4;
  r.n_i_mean = 4.5;
  CHECK(csv_row(r) == "p,9,phif,0.001,100,1.5000e-04,,4.5000,0.0000,0.0000,1,0");
}

TEST_CASE("PHIF needs fewer iterations than IC on a 256 grid") {
  auto c = parse_config("[problem]\nkind = heat2d\nn = 256\nnsteps = 5\n[solver]\nprecond = phif, ichol\neps = 1e-3\n"
                        "estimate_errors = false\n");
  const auto rows = run_bench(c.problems, c.solver);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == Method::Phif);
  CHECK(rows[1].method == Method::Ichol);
  CHECK(rows[0].n_i_mean < rows[1].n_i_mean);
  CHECK_FALSE(rows[1].e_a.has_value());
}

TEST_CASE("bench rows are deterministic and independent of the worker count") {
  auto c = load_config(fs::path(PHIF_CONFIG_DIR) / "smoke.cfg");
  for (auto& p : c.problems)
    p.nsteps = 2;
  const auto a = bench_csv(run_bench(c.problems, c.solver, 1));
  const auto b = bench_csv(run_bench(c.problems, c.solver, 2));
  CHECK(without_timings(a) == without_timings(b));
}

TEST_CASE("bench errors carry the problem id") {
  auto c = parse_config("[problem]\nid = tight\nkind = heat2d\nn = 32\nnsteps = 2\n[solver]\nmaxit = 1\n");
  try {
    (void)run_bench(c.problems, c.solver);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("tight") != std::string::npos);
  }
}

TEST_CASE("zero field dump") {
  const auto grid = GridSpec::make(2, 1, 2);
  const auto path = scratch("zero.f64");
  dump_field(Vector::Zero(9), grid, path);
  CHECK(fs::file_size(path) == 72);
  CHECK(slurp(path) == std::string(72, '\0'));
  const auto d = read_field(path);
  CHECK(d.min == 0.0);
  CHECK(d.max == 0.0);
  CHECK(d.n == 4);
  CHECK(d.dim == 2);
  CHECK_THROWS_AS(dump_field(Vector::Zero(8), grid, path), InvalidArgument);
}

TEST_CASE("dump round trip is bitwise") {
  const auto grid = GridSpec::make(3, 1, 4);
  Vector u(grid.num_dofs());
  for (Index i = 0; i < u.size(); ++i)
    u[i] = std::sin(1.0 + i) * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
  u[3] = -0.0;
  const auto path = scratch("rt.f64");
  dump_field(u, grid, path, 0.125);
  const auto d = read_field(path);
  REQUIRE(d.u.size() == u.size());
  CHECK(std::memcmp(d.u.data(), u.data(), sizeof(double) * static_cast<std::size_t>(u.size())) == 0);
  CHECK(d.time == 0.125);
  CHECK(d.max == u.maxCoeff());
  // Little-endian on disk.
  const std::string raw = slurp(path);
  std::uint64_t first = 0;
  for (int b = 7; b >= 0; --b)
    first = (first << 8) | static_cast<unsigned char>(raw[static_cast<std::size_t>(b)]);
  CHECK(std::bit_cast<double>(first) == u[0]);
}

TEST_CASE("initial heat dump records the peak sample") {
  auto spec = problem_defaults("heat2d");
  spec.grid = GridSpec::make(2, 2, 8);
  const Vector u0 = initial_condition(spec);
  const auto path = scratch("u0.f64");
  dump_field(u0, spec.grid, path);
  double peak = 0.0;
  for (Index j = 0; j < spec.grid.num_dofs(); ++j) {
    const auto p = spec.grid.point(j);
    peak = std::max(peak, initial_value(spec.init, std::span<const double>(p.data(), 2)));
  }
  CHECK(read_field(path).max == peak);
}

TEST_CASE("repeated identical grids give zero self-convergence error") {
  // The config parser insists on increasing n, so the settings are built directly.
  auto c = parse_config("[problem]\nkind = logistic2d\nlevels = 1\nleaf = 8\n[solver]\neps = 1e-6\n");
  const auto r = run_convergence(c.problems[0], {{16, 16, 16}, 0.125}, c.solver);
  REQUIRE(r.self.size() == 2);
  for (const auto& p : r.self)
    CHECK(p.error == 0.0);
  CHECK(r.manufactured.empty());
  CHECK_FALSE(r.self_slope.has_value());
}

TEST_CASE("manufactured convergence slope") {
  const auto c = load_config(fs::path(PHIF_CONFIG_DIR) / "convergence_manufactured.cfg");
  const auto r = run_convergence(c.problems[0], c.convergence, c.solver);
  REQUIRE(r.manufactured_slope.has_value());
  CHECK(*r.manufactured_slope >= 1.7);
  CHECK(*r.manufactured_slope <= 2.3);
  const std::string csv = convergence_csv(r);
  CHECK(csv.rfind("reference,n,dt,error\n", 0) == 0);
}

TEST_CASE("logistic self-convergence errors decrease") {
  auto c = parse_config("[problem]\nkind = logistic2d\nlevels = 3\nleaf = 8\n[solver]\neps = 1e-6\n"
                        "[convergence]\nn = 64, 128, 256, 512\nt_final = 0.0625\n");
  const auto r = run_convergence(c.problems[0], c.convergence, c.solver);
  REQUIRE(r.self.size() == 3);
  CHECK(r.self[0].error > r.self[1].error);
  CHECK(r.self[1].error > r.self[2].error);
  CHECK_THROWS_AS(run_convergence(c.problems[0], {{64, 128}, 0.0625}, c.solver), InvalidArgument);
  CHECK_THROWS_AS(run_convergence(c.problems[0], {{48, 96, 192}, 0.0625}, c.solver), InvalidArgument);
}

TEST_CASE("slope fit") {
  std::vector<ConvergencePoint> pts{{16, 0, 1.0 / 256}, {32, 0, 1.0 / 1024}, {64, 0, 1.0 / 4096}};
  CHECK(*fit_slope(pts) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("every shipped config runs at smoke scale within a minute") {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(PHIF_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg")
      continue;
    ++count;
    INFO(entry.path().filename().string());
    const auto t0 = std::chrono::steady_clock::now();
    const Config c = smoke_tier(load_config(entry.path()));
    for (const auto& p : c.problems)
      CHECK(p.grid.n <= 64);
    const auto rows = run_bench(c.problems, c.solver);
    CHECK(rows.size() == c.problems.size() * c.solver.choices().size());
    for (const auto& r : rows)
      CHECK(r.converged);
    if (!c.convergence.n.empty()) {
      CHECK(c.convergence.n.back() <= 64);
      (void)run_convergence(c.problems.front(), c.convergence, c.solver);
    }
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 60.0);
  }
  CHECK(count >= 1);
}

TEST_CASE("command line exit codes and outputs") {
  const fs::path dir = scratch("run");
  fs::remove_all(dir);
  const fs::path cfg = scratch("solve.cfg");
  {
    std::ofstream out(cfg);
    out << "[problem]\nid = tiny\nkind = heat2d\nn = 16\nnsteps = 3\n[output]\ndir = " << dir.string()
        << "\ndump_every = 1\nreport = " << (dir / "bench.csv").string() << "\n";
  }
  CHECK(run_cli("info " + cfg.string()) == 0);
  CHECK(run_cli("solve " + cfg.string()) == 0);
  for (int k = 0; k <= 3; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "tiny_step%06d.f64", k);
    CHECK(fs::exists(dir / name));
  }
  CHECK(fs::exists(dir / "plot_fields.py"));
  CHECK(run_cli("bench " + cfg.string()) == 0);
  CHECK(slurp(dir / "bench.csv").rfind(std::string(kBenchCsvHeader), 0) == 0);

  const fs::path bad = scratch("bad.cfg");
  std::ofstream(bad) << "[problem]\nkind = heat2d\nn = 16\ntypo = 1\n";
  CHECK(run_cli("info " + bad.string()) == 1);
  CHECK(run_cli("info " + scratch("missing.cfg").string()) == 1);
  CHECK(run_cli("frobnicate") == 1);

  const fs::path tight = scratch("tight.cfg");
  std::ofstream(tight) << "[problem]\nkind = heat2d\nn = 32\nnsteps = 2\n[solver]\nmaxit = 1\n";
  CHECK(run_cli("bench " + tight.string()) == 2);
}

} // TEST_SUITE
