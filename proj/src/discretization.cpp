#include "phif/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace phif {

GridSpec GridSpec::make(int dim, int levels, Index leaf) {
  GridSpec g;
  g.dim = dim;
  g.levels = levels;
  g.leaf = leaf;
  if (levels < 0 || levels > 24)
    throw InvalidArgument("GridSpec: levels out of range");
  g.n = leaf * (Index{1} << levels);
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (dim != 2 && dim != 3)
    throw InvalidArgument("GridSpec: dimension must be 2 or 3");
  if (leaf < 2)
    throw InvalidArgument("GridSpec: leaf size must be at least 2");
  if (levels < 0 || levels > 24 || n != leaf * (Index{1} << levels))
    throw InvalidArgument("GridSpec: n = " + std::to_string(n) + " is not leaf * 2^levels = " + std::to_string(leaf) +
                          " * 2^" + std::to_string(levels));
  const double total = std::pow(static_cast<double>(n - 1), dim);
  if (total > static_cast<double>(std::numeric_limits<Index>::max()))
    throw InvalidArgument("GridSpec: too many DOFs");
}

Index GridSpec::num_dofs() const noexcept {
  Index s = side();
  return dim == 2 ? s * s : s * s * s;
}

std::array<Index, 3> GridSpec::coords(Index dof) const noexcept {
  const Index s = side();
  std::array<Index, 3> c{0, 0, 0};
  c[0] = dof % s + 1;
  c[1] = (dof / s) % s + 1;
  if (dim == 3)
    c[2] = dof / (s * s) + 1;
  return c;
}

Index GridSpec::dof(std::span<const Index> c) const noexcept {
  const Index s = side();
  Index d = (c[0] - 1) + s * (c[1] - 1);
  if (dim == 3)
    d += s * s * (c[2] - 1);
  return d;
}

std::array<double, 3> GridSpec::point(Index dof) const noexcept {
  auto c = coords(dof);
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a)
    p[static_cast<std::size_t>(a)] = static_cast<double>(c[static_cast<std::size_t>(a)]) / static_cast<double>(n);
  return p;
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) noexcept {
  std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------

namespace {

double half_coord(Index k, Index n) { return static_cast<double>(k) / static_cast<double>(2 * n); }

// Visits every interior node and flux midpoint as half-index vectors:
// all coordinates even in [2, 2n-2], or exactly one odd in [1, 2n-1].
template <typename F>
void for_each_sample(int dim, Index n, F&& f) {
  std::array<Index, 3> k{0, 0, 0};
  const Index top = 2 * n;
  auto rec = [&](auto&& self, int axis, int odd_count) -> void {
    if (axis == dim) {
      f(std::span<const Index>(k.data(), static_cast<std::size_t>(dim)));
      return;
    }
    for (Index v = 1; v < top; ++v) {
      const bool odd = (v % 2) == 1;
      if (odd && odd_count > 0)
        continue;
      k[static_cast<std::size_t>(axis)] = v;
      self(self, axis + 1, odd_count + (odd ? 1 : 0));
    }
  };
  rec(rec, 0, 0);
}

} // namespace

CoeffField CoeffField::constant(double value) {
  if (!(value > 0.0))
    throw InvalidArgument("CoeffField: coefficient must be positive");
  CoeffField f;
  f.kind_ = Kind::Constant;
  f.value_ = value;
  return f;
}

CoeffField CoeffField::callback(std::function<double(std::span<const double>)> fn) {
  CoeffField f;
  f.kind_ = Kind::Callback;
  f.fn_ = std::move(fn);
  return f;
}

CoeffField CoeffField::gaussian_bumps(int dim, const BumpParams& params, Index normalization_n) {
  if (dim != 2 && dim != 3)
    throw InvalidArgument("CoeffField: dimension must be 2 or 3");
  if (params.count < 1 || !(params.sigma2 > 0.0) || !(params.lo > 0.0) || !(params.hi >= params.lo))
    throw InvalidArgument("CoeffField: need count >= 1, sigma2 > 0 and 0 < lo <= hi");
  if (normalization_n < 2)
    throw InvalidArgument("CoeffField: normalisation grid too small");
  CoeffField f;
  f.kind_ = Kind::GaussianBumps;
  f.dim_ = dim;
  f.params_ = params;
  const auto m = static_cast<std::size_t>(params.count);
  f.centers_.resize(m * static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < f.centers_.size(); ++i)
    f.centers_[i] = counter_uniform(params.seed, i);

  const Index n = normalization_n;
  const auto row = static_cast<std::size_t>(2 * n + 1);
  f.table_n_ = n;
  f.table_.resize(static_cast<std::size_t>(dim) * row * m);
  for (int a = 0; a < dim; ++a)
    for (std::size_t k = 0; k < row; ++k) {
      const double x = half_coord(static_cast<Index>(k), n);
      for (std::size_t i = 0; i < m; ++i) {
        const double d = x - f.centers_[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)];
        f.table_[(static_cast<std::size_t>(a) * row + k) * m + i] = std::exp(-d * d / params.sigma2);
      }
    }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for_each_sample(dim, n, [&](std::span<const Index> k) {
    const double r = f.raw_half(k);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  });
  f.raw_min_ = lo;
  f.raw_max_ = hi;
  return f;
}

double CoeffField::raw(std::span<const double> point) const {
  const auto m = static_cast<std::size_t>(params_.count);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double prod = 1.0;
    for (int a = 0; a < dim_; ++a) {
      const double d = point[static_cast<std::size_t>(a)] - centers_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(a)];
      prod *= std::exp(-d * d / params_.sigma2);
    }
    s += prod;
  }
  return s;
}

double CoeffField::raw_half(std::span<const Index> k) const {
  const auto m = static_cast<std::size_t>(params_.count);
  const auto row = static_cast<std::size_t>(2 * table_n_ + 1);
  const double* t0 = table_.data() + static_cast<std::size_t>(k[0]) * m;
  const double* t1 = table_.data() + (row + static_cast<std::size_t>(k[1])) * m;
  double s = 0.0;
  if (dim_ == 2) {
    for (std::size_t i = 0; i < m; ++i) {
      double prod = 1.0;
      prod *= t0[i];
      prod *= t1[i];
      s += prod;
    }
  } else {
    const double* t2 = table_.data() + (2 * row + static_cast<std::size_t>(k[2])) * m;
    for (std::size_t i = 0; i < m; ++i) {
      double prod = 1.0;
      prod *= t0[i];
      prod *= t1[i];
      prod *= t2[i];
      s += prod;
    }
  }
  return s;
}

double CoeffField::rescale(double r) const {
  const double span = raw_max_ - raw_min_;
  double v = span > 0.0 ? params_.lo + (params_.hi - params_.lo) * ((r - raw_min_) / span) : params_.lo;
  return std::clamp(v, params_.lo, params_.hi);
}

double CoeffField::operator()(std::span<const double> point) const {
  switch (kind_) {
  case Kind::Constant:
    return value_;
  case Kind::Callback:
    return fn_(point);
  case Kind::GaussianBumps:
    break;
  }
  return rescale(raw(point));
}

double CoeffField::at_half_index(std::span<const Index> k, Index n) const {
  if (kind_ == Kind::GaussianBumps && n == table_n_)
    return rescale(raw_half(k));
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < k.size(); ++a)
    p[a] = half_coord(k[a], n);
  return (*this)(std::span<const double>(p.data(), k.size()));
}

double sample_coeff(const CoeffField& field, std::span<const double> point) { return field(point); }

// ---------------------------------------------------------------------------

SymSparse build_stiffness(const GridSpec& grid, const CoeffField& field) {
  grid.validate();
  const Index N = grid.num_dofs();
  const Index n = grid.n;
  const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);
  const auto dim = static_cast<std::size_t>(grid.dim);

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(N) * (2 * dim + 1));
  std::vector<double> diag(static_cast<std::size_t>(N), 0.0);

  std::array<Index, 3> half{0, 0, 0};
  for (Index j = 0; j < N; ++j) {
    const auto c = grid.coords(j);
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b)
        half[b] = 2 * c[b];
      // Face between this node and its lower neighbour.
      half[a] = 2 * c[a] - 1;
      const double a_lo = field.at_half_index(std::span<const Index>(half.data(), dim), n) * inv_h2;
      half[a] = 2 * c[a] + 1;
      const double a_hi = field.at_half_index(std::span<const Index>(half.data(), dim), n) * inv_h2;
      diag[static_cast<std::size_t>(j)] -= a_lo;
      diag[static_cast<std::size_t>(j)] -= a_hi;
      if (c[a] + 1 <= n - 1) {
        auto nc = c;
        nc[a] += 1;
        const Index k = grid.dof(std::span<const Index>(nc.data(), dim));
        trip.push_back({j, k, a_hi});
        trip.push_back({k, j, a_hi});
      }
    }
  }
  for (Index j = 0; j < N; ++j)
    trip.push_back({j, j, diag[static_cast<std::size_t>(j)]});
  return assemble(N, trip);
}

CrankNicolsonPair build_cn_pair(const SymSparse& M, double dt) {
  if (!(dt > 0.0))
    throw InvalidArgument("build_cn_pair: dt must be positive");
  const double s = 0.5 * dt;
  std::vector<Triplet> ta, tb;
  ta.reserve(static_cast<std::size_t>(M.nnz() + M.dim()));
  tb.reserve(static_cast<std::size_t>(M.nnz() + M.dim()));
  for (Index i = 0; i < M.dim(); ++i) {
    auto c = M.row_cols(i);
    auto v = M.row_vals(i);
    bool has_diag = false;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] == i) {
        has_diag = true;
        ta.push_back({i, i, 1.0 - s * v[k]});
        tb.push_back({i, i, 1.0 + s * v[k]});
      } else {
        ta.push_back({i, c[k], -s * v[k]});
        tb.push_back({i, c[k], s * v[k]});
      }
    }
    if (!has_diag) {
      ta.push_back({i, i, 1.0});
      tb.push_back({i, i, 1.0});
    }
  }
  return {assemble(M.dim(), ta), assemble(M.dim(), tb)};
}

// ---------------------------------------------------------------------------

void ProblemSpec::validate() const {
  grid.validate();
  if (!(dt_factor > 0.0))
    throw InvalidArgument("ProblemSpec: dt must be positive");
  if (nsteps < 0)
    throw InvalidArgument("ProblemSpec: nsteps must be non-negative");
  if (reaction.kind == Reaction::Kind::Logistic && !(reaction.k2 > 0.0))
    throw InvalidArgument("ProblemSpec: logistic k2 must be positive");
  if (coeff.kind == CoeffSpec::Kind::Constant && !(coeff.value > 0.0))
    throw InvalidArgument("ProblemSpec: constant coefficient must be positive");
  if (coeff.kind == CoeffSpec::Kind::GaussianBumps &&
      (coeff.count < 1 || !(coeff.sigma2 > 0.0) || !(coeff.lo > 0.0) || !(coeff.hi >= coeff.lo)))
    throw InvalidArgument("ProblemSpec: bump coefficient needs count >= 1, sigma2 > 0, 0 < lo <= hi");
  if (!(init.sigma2 > 0.0) && (init.kind == InitialCondition::Kind::Gaussian || init.kind == InitialCondition::Kind::TwoGaussians))
    throw InvalidArgument("ProblemSpec: initial-condition sigma2 must be positive");
}

ProblemSpec problem_defaults(const std::string& kind) {
  ProblemSpec p;
  p.kind = kind;
  p.id = kind;
  constexpr double pi = std::numbers::pi;
  if (kind == "heat2d" || kind == "logistic2d") {
    p.grid = GridSpec::make(2, 3, 8);
    p.dt_factor = 1.0;
    p.coeff = {CoeffSpec::Kind::GaussianBumps, 1.0, 100, 0.005, 0.1, 10.0};
    if (kind == "heat2d") {
      p.init = {InitialCondition::Kind::TwoGaussians, 0.35, 0.65, 0.5, 0.05, 1.0};
    } else {
      p.init = {InitialCondition::Kind::Gaussian, 0.35, 0.65, 0.5, 0.05, 2.0 / (3.0 * std::sqrt(2.0 * pi * 0.05))};
      p.reaction = {Reaction::Kind::Logistic, 1.0, 10.0};
    }
  } else if (kind == "heat3d" || kind == "logistic3d") {
    p.grid = GridSpec::make(3, 2, 4);
    p.dt_factor = 0.1;
    if (kind == "heat3d") {
      p.coeff = {CoeffSpec::Kind::GaussianBumps, 1.0, 1000, 0.005, 0.05, 20.0};
      p.init = {InitialCondition::Kind::Gaussian, 0.35, 0.65, 0.5, 0.05, 1.0};
    } else {
      p.coeff = {CoeffSpec::Kind::GaussianBumps, 1.0, 200, 0.005, 0.05, 20.0};
      p.init = {InitialCondition::Kind::Gaussian, 0.35, 0.65, 0.5, 0.05, std::pow(2.0 * pi * std::sqrt(0.05), -1.5)};
      p.reaction = {Reaction::Kind::Logistic, 1.0, 10.0};
    }
  } else {
    throw InvalidArgument("unknown problem kind '" + kind + "'");
  }
  return p;
}

CoeffField build_coeff(const ProblemSpec& spec) {
  if (spec.coeff.kind == CoeffSpec::Kind::Constant)
    return CoeffField::constant(spec.coeff.value);
  BumpParams bp{spec.coeff.count, spec.coeff.sigma2, spec.coeff.lo, spec.coeff.hi, spec.seed};
  return CoeffField::gaussian_bumps(spec.grid.dim, bp, spec.grid.n);
}

double initial_value(const InitialCondition& init, std::span<const double> p) {
  auto gauss = [&](double centre) {
    double r2 = 0.0;
    for (double x : p)
      r2 += (x - centre) * (x - centre);
    return std::exp(-r2 / init.sigma2);
  };
  switch (init.kind) {
  case InitialCondition::Kind::TwoGaussians:
    return init.amplitude * (gauss(init.c1) + gauss(init.c2));
  case InitialCondition::Kind::Gaussian:
    return init.amplitude * gauss(init.c);
  case InitialCondition::Kind::Sine: {
    double v = init.amplitude;
    for (double x : p)
      v *= std::sin(std::numbers::pi * x);
    return v;
  }
  case InitialCondition::Kind::Zero:
    return 0.0;
  }
  throw InvalidArgument("initial_value: unknown descriptor");
}

Vector initial_condition(const ProblemSpec& spec) {
  const auto& g = spec.grid;
  Vector u(g.num_dofs());
  for (Index j = 0; j < g.num_dofs(); ++j) {
    auto p = g.point(j);
    u[j] = initial_value(spec.init, std::span<const double>(p.data(), static_cast<std::size_t>(g.dim)));
  }
  return u;
}

Vector manufactured_heat_solution(const GridSpec& grid, const CoeffField& field, double t) {
  if (!field.is_constant() || field.constant_value() != 1.0)
    throw InvalidArgument("manufactured_heat_solution: requires the constant coefficient a = 1");
  const double pi = std::numbers::pi;
  const double decay = std::exp(-static_cast<double>(grid.dim) * pi * pi * t);
  Vector u(grid.num_dofs());
  for (Index j = 0; j < grid.num_dofs(); ++j) {
    auto p = grid.point(j);
    double v = decay;
    for (int a = 0; a < grid.dim; ++a)
      v *= std::sin(pi * p[static_cast<std::size_t>(a)]);
    u[j] = v;
  }
  return u;
}

} // namespace phif
