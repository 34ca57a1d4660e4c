#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "phif/discretization.hpp"
#include "phif/factor.hpp"
#include "phif/hierarchy.hpp"
#include "phif/sparse.hpp"

namespace phif {

/// z = P r for an SPD preconditioner P ~ A^{-1}.
using Preconditioner = std::function<Vector(const Vector&)>;

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

struct SolveResult {
  Vector x;
  SolveStats stats;
};

/// Unpreconditioned conjugate gradient; stops when ||b - A x|| <= tol ||b|| (true residual).
SolveResult cg(const SymSparse& A, const Vector& b, double tol, int maxit, const Vector* x0 = nullptr);

/// Preconditioned CG. Throws NumericalError if the preconditioner (or A) is found indefinite.
SolveResult pcg(const SymSparse& A, const Vector& b, const Preconditioner& precond, double tol, int maxit,
                const Vector* x0 = nullptr);

/// Drop-tolerance incomplete Cholesky factor, lower triangle in compressed columns (diagonal first).
class IcholFactor {
public:
  Index dim() const noexcept { return dim_; }
  double droptol() const noexcept { return droptol_; }
  double shift() const noexcept { return shift_; }
  std::int64_t nnz() const noexcept { return static_cast<std::int64_t>(rows_.size()); }
  std::int64_t memory_bytes() const noexcept;

  /// Solves L L^T z = r.
  Vector solve(const Vector& r) const;
  /// Explicit lower-triangular factor, for tests.
  DenseBlock to_dense() const;

private:
  friend IcholFactor ichol_droptol(const SymSparse& A, double droptol);
  Index dim_ = 0;
  double droptol_ = 0.0;
  double shift_ = 0.0;
  std::vector<std::int64_t> col_ptr_{0};
  std::vector<Index> rows_;
  std::vector<double> vals_;
};

/// Left-looking IC: L(i,j) is dropped when |L(i,j) L(j,j)| <= droptol * ||A(j:n, j)||_1.
/// On a non-positive pivot the factorization restarts on A + alpha I, alpha = 1e-3 max diag(A), doubling.
IcholFactor ichol_droptol(const SymSparse& A, double droptol);

enum class Method { Phif, Ichol, None };

const char* to_string(Method m) noexcept;
Method method_from_string(const std::string& s);

struct PrecondChoice {
  Method method = Method::Phif;
  /// ID tolerance for PHIF, drop tolerance for IC, unused otherwise.
  double tolerance = 1e-3;
};

/// Discretized problem: coefficient, stiffness, Crank-Nicolson pair, initial state and tree.
struct AssembledProblem {
  ProblemSpec spec;
  CoeffField coeff;
  SymSparse M;
  CrankNicolsonPair cn;
  Vector u0;
  DofHierarchy hierarchy;
};

AssembledProblem assemble_problem(const ProblemSpec& spec);

/// A built preconditioner plus its accounting.
struct BuiltPreconditioner {
  PrecondChoice choice;
  std::optional<PhifFactor> phif;
  std::optional<IcholFactor> ichol;
  double setup_seconds = 0.0;

  std::int64_t memory_bytes() const;
  Preconditioner op() const;
};

BuiltPreconditioner build_preconditioner(const AssembledProblem& problem, const PrecondChoice& choice);

struct RunOptions {
  double tol = 1e-12;
  int maxit = 1000;
  bool warm_start = true;
  /// Keep u every this many steps (0: none). Step 0 is the initial state.
  int snapshot_every = 0;
};

struct TimeSeries {
  Vector u;
  std::vector<int> iterations;
  bool all_converged = true;
  double solve_seconds = 0.0;
  std::vector<std::pair<int, Vector>> snapshots;

  double mean_iterations() const;
};

/// Logistic growth k1 u (1 - u/k2) pointwise, or zero.
Vector reaction_term(const Reaction& r, const Vector& u);

/// Crank-Nicolson for diffusion with explicit reaction:
/// A u^k = B u^{k-1} + dt r(u^{k-1}), each solve by PCG.
/// Throws NumericalError on NaN/Inf or, for preconditioned runs, non-convergence (with the step index).
TimeSeries crank_nicolson(const AssembledProblem& problem, const BuiltPreconditioner& precond, const RunOptions& opts);

/// One table row.
struct RunReport {
  std::string problem;
  Index N = 0;
  Method method = Method::Phif;
  double tolerance = 0.0;
  std::int64_t mem_bytes = 0;
  std::optional<double> e_a;
  std::optional<double> e_s;
  double n_i_mean = 0.0;
  double factor_seconds = 0.0;
  double solve_seconds = 0.0;
  bool warm_start = true;
  std::uint64_t seed = 0;
  bool converged = true;
};

struct RunOutcome {
  Vector u_final;
  RunReport report;
};

/// Factor once, then step. e_a and e_s are left empty (see diagnostics).
RunOutcome crank_nicolson_run(const ProblemSpec& spec, const PrecondChoice& choice, const RunOptions& opts);

} // namespace phif
