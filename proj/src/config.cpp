#include "phif/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace phif {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::map<std::string, Entry> keys;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

double to_double(const Entry& e, const std::string& key) {
  const std::string& s = e.value;
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    fail(e.line, "'" + key + "' expects a number, got '" + s + "'");
  return v;
}

long long to_integer(const Entry& e, const std::string& key) {
  long long v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    fail(e.line, "'" + key + "' expects an integer, got '" + e.value + "'");
  return v;
}

bool to_bool(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1" || e.value == "yes")
    return true;
  if (e.value == "false" || e.value == "0" || e.value == "no")
    return false;
  fail(e.line, "'" + key + "' expects true or false, got '" + e.value + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string_view rest = s;
  while (true) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty())
      out.emplace_back(item);
    if (comma == std::string_view::npos)
      break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<double> to_double_list(const Entry& e, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value))
    out.push_back(to_double(Entry{item, e.line}, key));
  if (out.empty())
    fail(e.line, "'" + key + "' expects a non-empty list");
  return out;
}

void require_positive(const std::vector<double>& v, const Entry& e, const std::string& key) {
  for (double x : v)
    if (!(x > 0.0))
      fail(e.line, "'" + key + "' must be positive");
}

std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> out;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(line_no, "malformed section header");
      std::string name{trim(line.substr(1, line.size() - 2))};
      if (name != "problem" && name != "solver" && name != "output" && name != "convergence")
        fail(line_no, "unknown section [" + name + "]");
      if (name != "problem")
        for (const auto& s : out)
          if (s.name == name)
            fail(line_no, "section [" + name + "] appears twice");
      out.push_back({name, line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(line_no, "expected key = value");
    if (out.empty())
      fail(line_no, "key outside of any section");
    std::string key{trim(line.substr(0, eq))};
    std::string value{trim(line.substr(eq + 1))};
    if (key.empty())
      fail(line_no, "empty key");
    if (!out.back().keys.emplace(key, Entry{value, line_no}).second)
      fail(line_no, "duplicate key '" + key + "'");
  }
  return out;
}

ProblemSpec parse_problem(const Section& sec) {
  auto take = [&](const std::string& key) -> const Entry* {
    auto it = sec.keys.find(key);
    return it == sec.keys.end() ? nullptr : &it->second;
  };
  const Entry* kind = take("kind");
  if (!kind)
    fail(sec.line, "[problem] is missing required key 'kind'");
  ProblemSpec p;
  try {
    p = problem_defaults(kind->value);
  } catch (const InvalidArgument& e) {
    fail(kind->line, e.what());
  }

  static const char* known[] = {"id",         "kind",        "n",           "levels",       "leaf",
                                "dt_factor",  "nsteps",      "seed",        "coeff.kind",   "coeff.value",
                                "coeff.m",    "coeff.sigma2", "coeff.lo",   "coeff.hi",     "init.kind",
                                "init.c1",    "init.c2",     "init.c",      "init.sigma2",  "init.amplitude",
                                "reaction.kind", "reaction.k1", "reaction.k2"};
  for (const auto& [key, e] : sec.keys)
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      fail(e.line, "unknown key '" + key + "' in [problem]");

  // Grid: n, levels and leaf; any two determine the third, all three must agree.
  const Entry* en = take("n");
  const Entry* el = take("levels");
  const Entry* ef = take("leaf");
  if (!en && !el)
    fail(sec.line, "[problem] needs 'n' or 'levels'");
  const int dim = p.grid.dim;
  long long leaf = ef ? to_integer(*ef, "leaf") : (dim == 2 ? 8 : 4);
  long long levels = 0;
  if (el) {
    levels = to_integer(*el, "levels");
    if (levels < 0 || levels > 20)
      fail(el->line, "'levels' must lie in [0, 20]");
  }
  if (en) {
    const long long n = to_integer(*en, "n");
    if (el && !ef) {
      if (n % (1LL << levels) != 0)
        fail(en->line, "n = " + std::to_string(n) + " is not divisible by 2^levels");
      leaf = n >> levels;
    } else if (!el) {
      if (leaf < 2 || n % leaf != 0 || ((n / leaf) & (n / leaf - 1)) != 0)
        fail(en->line, "n = " + std::to_string(n) + " is not leaf * 2^levels with leaf = " + std::to_string(leaf));
      for (long long q = n / leaf; q > 1; q >>= 1)
        ++levels;
    }
    if (leaf * (1LL << levels) != n)
      fail(en->line, "n = " + std::to_string(n) + " does not equal leaf * 2^levels = " +
                         std::to_string(leaf * (1LL << levels)));
  }
  try {
    p.grid = GridSpec::make(dim, static_cast<int>(levels), static_cast<Index>(leaf));
  } catch (const InvalidArgument& e) {
    fail(sec.line, e.what());
  }

  if (auto e = take("dt_factor"))
    p.dt_factor = to_double(*e, "dt_factor");
  if (auto e = take("nsteps")) {
    const auto v = to_integer(*e, "nsteps");
    if (v < 0 || v > 1000000)
      fail(e->line, "'nsteps' must lie in [0, 1e6]");
    p.nsteps = static_cast<int>(v);
  }
  if (auto e = take("seed")) {
    const auto v = to_integer(*e, "seed");
    if (v < 0)
      fail(e->line, "'seed' must be non-negative");
    p.seed = static_cast<std::uint64_t>(v);
  }

  if (auto e = take("coeff.kind")) {
    if (e->value == "constant")
      p.coeff.kind = CoeffSpec::Kind::Constant;
    else if (e->value == "bumps")
      p.coeff.kind = CoeffSpec::Kind::GaussianBumps;
    else
      fail(e->line, "'coeff.kind' expects constant or bumps");
  }
  if (auto e = take("coeff.value"))
    p.coeff.value = to_double(*e, "coeff.value");
  if (auto e = take("coeff.m")) {
    const auto v = to_integer(*e, "coeff.m");
    if (v < 1 || v > 1000000)
      fail(e->line, "'coeff.m' must lie in [1, 1e6]");
    p.coeff.count = static_cast<int>(v);
  }
  if (auto e = take("coeff.sigma2"))
    p.coeff.sigma2 = to_double(*e, "coeff.sigma2");
  if (auto e = take("coeff.lo"))
    p.coeff.lo = to_double(*e, "coeff.lo");
  if (auto e = take("coeff.hi"))
    p.coeff.hi = to_double(*e, "coeff.hi");

  if (auto e = take("init.kind")) {
    using K = InitialCondition::Kind;
    if (e->value == "two_gaussians")
      p.init.kind = K::TwoGaussians;
    else if (e->value == "gaussian")
      p.init.kind = K::Gaussian;
    else if (e->value == "sine")
      p.init.kind = K::Sine;
    else if (e->value == "zero")
      p.init.kind = K::Zero;
    else
      fail(e->line, "'init.kind' expects two_gaussians, gaussian, sine or zero");
  }
  if (auto e = take("init.c1"))
    p.init.c1 = to_double(*e, "init.c1");
  if (auto e = take("init.c2"))
    p.init.c2 = to_double(*e, "init.c2");
  if (auto e = take("init.c"))
    p.init.c = to_double(*e, "init.c");
  if (auto e = take("init.sigma2"))
    p.init.sigma2 = to_double(*e, "init.sigma2");
  if (auto e = take("init.amplitude"))
    p.init.amplitude = to_double(*e, "init.amplitude");

  if (auto e = take("reaction.kind")) {
    if (e->value == "none")
      p.reaction.kind = Reaction::Kind::None;
    else if (e->value == "logistic")
      p.reaction.kind = Reaction::Kind::Logistic;
    else
      fail(e->line, "'reaction.kind' expects none or logistic");
  }
  if (auto e = take("reaction.k1"))
    p.reaction.k1 = to_double(*e, "reaction.k1");
  if (auto e = take("reaction.k2"))
    p.reaction.k2 = to_double(*e, "reaction.k2");

  p.id = take("id") ? take("id")->value : p.kind + "-n" + std::to_string(p.grid.n);
  if (p.id.empty() || p.id.find_first_of(", \t\"") != std::string::npos)
    fail(take("id") ? take("id")->line : sec.line, "'id' must be non-empty without commas, quotes or spaces");
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    fail(sec.line, e.what());
  }
  return p;
}

void parse_solver(const Section& sec, SolverSettings& s) {
  for (const auto& [key, e] : sec.keys) {
    if (key == "precond") {
      s.methods.clear();
      for (const auto& m : split_list(e.value)) {
        try {
          s.methods.push_back(method_from_string(m));
        } catch (const InvalidArgument& err) {
          fail(e.line, err.what());
        }
      }
      if (s.methods.empty())
        fail(e.line, "'precond' expects a non-empty list");
    } else if (key == "eps") {
      s.eps = to_double_list(e, key);
      require_positive(s.eps, e, key);
      for (double v : s.eps)
        if (!(v < 1.0))
          fail(e.line, "'eps' must lie in (0, 1)");
    } else if (key == "droptol") {
      s.droptol = to_double_list(e, key);
      require_positive(s.droptol, e, key);
    } else if (key == "tol") {
      s.run.tol = to_double(e, key);
      require_positive({s.run.tol}, e, key);
    } else if (key == "maxit") {
      const auto v = to_integer(e, key);
      if (v < 1 || v > 100000000)
        fail(e.line, "'maxit' must be positive");
      s.run.maxit = static_cast<int>(v);
    } else if (key == "warm_start") {
      s.run.warm_start = to_bool(e, key);
    } else if (key == "estimate_errors") {
      s.estimate_errors = to_bool(e, key);
    } else if (key == "estimate_target") {
      s.estimate_target = to_double(e, key);
      require_positive({s.estimate_target}, e, key);
    } else if (key == "estimate_iters") {
      const auto v = to_integer(e, key);
      if (v < 1 || v > 100000)
        fail(e.line, "'estimate_iters' must be positive");
      s.estimate_iters = static_cast<int>(v);
    } else {
      fail(e.line, "unknown key '" + key + "' in [solver]");
    }
  }
}

void parse_output(const Section& sec, OutputSettings& o) {
  for (const auto& [key, e] : sec.keys) {
    if (key == "dir") {
      o.dir = e.value;
    } else if (key == "dump_every") {
      const auto v = to_integer(e, key);
      if (v < 0)
        fail(e.line, "'dump_every' must be non-negative");
      o.dump_every = static_cast<int>(v);
    } else if (key == "report") {
      o.report = e.value;
    } else if (key == "dump_hierarchy") {
      o.dump_hierarchy = to_bool(e, key);
    } else {
      fail(e.line, "unknown key '" + key + "' in [output]");
    }
  }
}

void parse_convergence(const Section& sec, ConvergenceSettings& c) {
  for (const auto& [key, e] : sec.keys) {
    if (key == "n") {
      c.n.clear();
      for (const auto& item : split_list(e.value)) {
        const auto v = to_integer(Entry{item, e.line}, key);
        if (v < 2 || v > 1 << 16)
          fail(e.line, "'n' entries must lie in [2, 65536]");
        c.n.push_back(static_cast<Index>(v));
      }
      if (!std::is_sorted(c.n.begin(), c.n.end()) || std::adjacent_find(c.n.begin(), c.n.end()) != c.n.end())
        fail(e.line, "'n' must be strictly increasing");
    } else if (key == "t_final") {
      c.t_final = to_double(e, key);
      require_positive({c.t_final}, e, key);
    } else {
      fail(e.line, "unknown key '" + key + "' in [convergence]");
    }
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? ", " : "") + f(v[i]);
  return out;
}

} // namespace

std::vector<PrecondChoice> SolverSettings::choices() const {
  std::vector<PrecondChoice> out;
  for (Method m : methods) {
    switch (m) {
    case Method::Phif:
      for (double e : eps)
        out.push_back({m, e});
      break;
    case Method::Ichol:
      for (double e : droptol.empty() ? eps : droptol)
        out.push_back({m, e});
      break;
    case Method::None:
      out.push_back({m, 0.0});
      break;
    }
  }
  return out;
}

Config parse_config(std::string_view text) {
  Config c;
  for (const auto& sec : split_sections(text)) {
    if (sec.name == "problem")
      c.problems.push_back(parse_problem(sec));
    else if (sec.name == "solver")
      parse_solver(sec, c.solver);
    else if (sec.name == "output")
      parse_output(sec, c.output);
    else
      parse_convergence(sec, c.convergence);
  }
  for (std::size_t i = 0; i < c.problems.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (c.problems[i].id == c.problems[j].id)
        throw ConfigError("config: duplicate problem id '" + c.problems[i].id + "'");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const Config& c) {
  std::ostringstream os;
  for (const auto& p : c.problems) {
    os << "[problem]\n";
    os << "id = " << p.id << "\nkind = " << p.kind << "\nn = " << p.grid.n << "\nlevels = " << p.grid.levels
       << "\nleaf = " << p.grid.leaf << "\ndt_factor = " << num(p.dt_factor) << "\nnsteps = " << p.nsteps
       << "\nseed = " << p.seed << "\n";
    os << "coeff.kind = " << (p.coeff.kind == CoeffSpec::Kind::Constant ? "constant" : "bumps") << "\n";
    os << "coeff.value = " << num(p.coeff.value) << "\ncoeff.m = " << p.coeff.count
       << "\ncoeff.sigma2 = " << num(p.coeff.sigma2) << "\ncoeff.lo = " << num(p.coeff.lo)
       << "\ncoeff.hi = " << num(p.coeff.hi) << "\n";
    static const char* init_names[] = {"two_gaussians", "gaussian", "sine", "zero"};
    os << "init.kind = " << init_names[static_cast<int>(p.init.kind)] << "\ninit.c1 = " << num(p.init.c1)
       << "\ninit.c2 = " << num(p.init.c2) << "\ninit.c = " << num(p.init.c) << "\ninit.sigma2 = " << num(p.init.sigma2)
       << "\ninit.amplitude = " << num(p.init.amplitude) << "\n";
    os << "reaction.kind = " << (p.reaction.kind == Reaction::Kind::None ? "none" : "logistic")
       << "\nreaction.k1 = " << num(p.reaction.k1) << "\nreaction.k2 = " << num(p.reaction.k2) << "\n\n";
  }
  const auto& s = c.solver;
  os << "[solver]\nprecond = " << join(s.methods, [](Method m) { return std::string(to_string(m)); })
     << "\neps = " << join(s.eps, num) << "\n";
  if (!s.droptol.empty())
    os << "droptol = " << join(s.droptol, num) << "\n";
  os << "tol = " << num(s.run.tol) << "\nmaxit = " << s.run.maxit
     << "\nwarm_start = " << (s.run.warm_start ? "true" : "false")
     << "\nestimate_errors = " << (s.estimate_errors ? "true" : "false")
     << "\nestimate_target = " << num(s.estimate_target) << "\nestimate_iters = " << s.estimate_iters << "\n\n";
  os << "[output]\ndir = " << c.output.dir << "\ndump_every = " << c.output.dump_every << "\n";
  if (!c.output.report.empty())
    os << "report = " << c.output.report << "\n";
  os << "dump_hierarchy = " << (c.output.dump_hierarchy ? "true" : "false") << "\n";
  if (!c.convergence.n.empty())
    os << "\n[convergence]\nn = " << join(c.convergence.n, [](Index v) { return std::to_string(v); })
       << "\nt_final = " << num(c.convergence.t_final) << "\n";
  return os.str();
}

Config smoke_tier(Config c, const SmokeLimits& limits) {
  auto cap_for = [&](int dim) { return dim == 2 ? limits.max_n_2d : limits.max_n_3d; };
  for (auto& p : c.problems) {
    int levels = p.grid.levels;
    while (levels > 0 && (p.grid.leaf << levels) > cap_for(p.grid.dim))
      --levels;
    p.grid = GridSpec::make(p.grid.dim, levels, p.grid.leaf);
    p.nsteps = std::min(p.nsteps, limits.max_steps);
  }
  if (!c.convergence.n.empty() && !c.problems.empty()) {
    // Halving every n keeps the refinement ratios, so t_final / dt stays an integer when it was one.
    const Index cap = cap_for(c.problems.front().grid.dim);
    while (c.convergence.n.back() > cap && c.convergence.n.front() % 2 == 0)
      for (auto& n : c.convergence.n)
        n /= 2;
  }
  c.output.dir = (std::filesystem::path(c.output.dir) / "smoke").string();
  c.output.report.clear();
  return c;
}

} // namespace phif
