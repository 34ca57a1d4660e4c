#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "phif/sparse.hpp"

namespace phif {

/// Uniform grid on (0,1)^d with n = leaf * 2^levels cells per side.
///
/// Interior nodes are numbered x-fastest: dof = (i-1) + (n-1)(j-1) [+ (n-1)^2 (k-1)].
struct GridSpec {
  int dim = 2;
  Index n = 2;
  int levels = 0;
  Index leaf = 2;

  /// Throws InvalidArgument unless dim in {2,3}, n = leaf * 2^levels and leaf >= 2.
  static GridSpec make(int dim, int levels, Index leaf);
  void validate() const;

  double h() const noexcept { return 1.0 / static_cast<double>(n); }
  Index side() const noexcept { return n - 1; }
  Index num_dofs() const noexcept;

  /// Grid coordinates (1..n-1 per axis) of a DOF.
  std::array<Index, 3> coords(Index dof) const noexcept;
  Index dof(std::span<const Index> coords) const noexcept;
  /// Physical position of a DOF.
  std::array<double, 3> point(Index dof) const noexcept;
};

/// Counter-based generator: the k-th draw of stream `seed` is splitmix64(seed + (k+1) * 0x9E3779B97F4A7C15)
/// mapped to [0,1) by taking the top 53 bits.
double counter_uniform(std::uint64_t seed, std::uint64_t counter) noexcept;

struct BumpParams {
  int count = 100;
  double sigma2 = 0.005;
  double lo = 0.1;
  double hi = 10.0;
  std::uint64_t seed = 0;
};

/// Diffusion coefficient a(x) > 0.
///
/// The bump field is sum_i prod_axis exp(-(x_a - c_ia)^2 / sigma2) with centres
/// c_ia = counter_uniform(seed, i*dim + a), affinely mapped so that its minimum and
/// maximum over the interior nodes and flux midpoints of the normalisation grid
/// become lo and hi. Values elsewhere are clamped to [lo, hi].
class CoeffField {
public:
  enum class Kind { Constant, GaussianBumps, Callback };

  static CoeffField constant(double value);
  static CoeffField gaussian_bumps(int dim, const BumpParams& params, Index normalization_n);
  static CoeffField callback(std::function<double(std::span<const double>)> fn);

  Kind kind() const noexcept { return kind_; }
  bool is_constant() const noexcept { return kind_ == Kind::Constant; }
  double constant_value() const noexcept { return value_; }
  const BumpParams& bumps() const noexcept { return params_; }
  /// Bump centre coordinates, count x dim row-major.
  const std::vector<double>& centers() const noexcept { return centers_; }

  double operator()(std::span<const double> point) const;

  /// Value at coordinates k/(2n) per axis (k even: node line, k odd: midpoint line).
  double at_half_index(std::span<const Index> k, Index n) const;

private:
  double raw(std::span<const double> point) const;
  double raw_half(std::span<const Index> k) const;
  double rescale(double r) const;

  Kind kind_ = Kind::Constant;
  double value_ = 1.0;
  int dim_ = 0;
  BumpParams params_;
  std::vector<double> centers_;
  double raw_min_ = 0.0, raw_max_ = 1.0;
  // Per-axis factors exp(-(k/(2n) - c)^2/sigma2) for k = 0..2n on the normalisation grid.
  Index table_n_ = 0;
  std::vector<double> table_;
  std::function<double(std::span<const double>)> fn_;
};

double sample_coeff(const CoeffField& field, std::span<const double> point);

/// Variable-coefficient 5-point (2D) / 7-point (3D) operator for div(a grad u)
/// with zero Dirichlet data; symmetric negative definite.
SymSparse build_stiffness(const GridSpec& grid, const CoeffField& field);

struct CrankNicolsonPair {
  SymSparse A; // I - dt/2 M
  SymSparse B; // I + dt/2 M
};

CrankNicolsonPair build_cn_pair(const SymSparse& M, double dt);

struct InitialCondition {
  enum class Kind { TwoGaussians, Gaussian, Sine, Zero };
  Kind kind = Kind::TwoGaussians;
  double c1 = 0.35;
  double c2 = 0.65;
  double c = 0.5;
  double sigma2 = 0.05;
  double amplitude = 1.0;
};

struct Reaction {
  enum class Kind { None, Logistic };
  Kind kind = Kind::None;
  double k1 = 1.0;
  double k2 = 10.0;
};

struct CoeffSpec {
  enum class Kind { Constant, GaussianBumps };
  Kind kind = Kind::GaussianBumps;
  double value = 1.0;
  int count = 100;
  double sigma2 = 0.005;
  double lo = 0.1;
  double hi = 10.0;
};

/// Everything that determines one experiment.
struct ProblemSpec {
  std::string id = "problem";
  std::string kind = "heat2d";
  GridSpec grid;
  CoeffSpec coeff;
  InitialCondition init;
  Reaction reaction;
  double dt_factor = 1.0;
  int nsteps = 100;
  std::uint64_t seed = 0;

  double dt() const noexcept { return dt_factor * grid.h(); }
  void validate() const;
};

/// Defaults for heat2d, heat3d, logistic2d, logistic3d.
ProblemSpec problem_defaults(const std::string& kind);

CoeffField build_coeff(const ProblemSpec& spec);

double initial_value(const InitialCondition& init, std::span<const double> point);
Vector initial_condition(const ProblemSpec& spec);

/// prod_axis sin(pi x_axis) * exp(-d pi^2 t) at the interior nodes; requires a == 1.
Vector manufactured_heat_solution(const GridSpec& grid, const CoeffField& field, double t);

} // namespace phif
