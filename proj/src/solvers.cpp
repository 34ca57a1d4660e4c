#include "phif/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace phif {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

SolveResult pcg(const SymSparse& A, const Vector& b, const Preconditioner& precond, double tol, int maxit,
                const Vector* x0) {
  const Index n = A.dim();
  if (b.size() != n || (x0 && x0->size() != n))
    throw InvalidArgument("pcg: dimension mismatch");
  if (!(tol > 0.0))
    throw InvalidArgument("pcg: tolerance must be positive");

  SolveResult out;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x = Vector::Zero(n);
    out.stats = {0, 0.0, true};
    return out;
  }

  Vector x = x0 ? *x0 : Vector::Zero(n);
  Vector r(n), Ap(n);
  if (x0) {
    spmv_into(A, x, Ap);
    r = b - Ap;
  } else {
    r = b;
  }
  double rel = r.norm() / bnorm;
  if (rel <= tol) {
    out.x = std::move(x);
    out.stats = {0, rel, true};
    return out;
  }

  Vector z = precond(r);
  double rz = r.dot(z);
  if (!(rz > 0.0))
    throw NumericalError("pcg: preconditioner is not positive definite (r'z = " + std::to_string(rz) + ")");
  Vector p = z;

  int it = 0;
  while (it < maxit) {
    ++it;
    spmv_into(A, p, Ap);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
      throw NumericalError("pcg: matrix is not positive definite (p'Ap = " + std::to_string(pAp) + ")");
    const double alpha = rz / pAp;
    x.noalias() += alpha * p;
    if (it % 50 == 0) {
      spmv_into(A, x, Ap);
      r = b - Ap;
    } else {
      r.noalias() -= alpha * Ap;
    }
    rel = r.norm() / bnorm;
    if (rel <= tol) {
      spmv_into(A, x, Ap);
      r = b - Ap;
      rel = r.norm() / bnorm;
      if (rel <= tol) {
        out.x = std::move(x);
        out.stats = {it, rel, true};
        return out;
      }
    }
    z = precond(r);
    const double rz_new = r.dot(z);
    if (!(rz_new > 0.0))
      throw NumericalError("pcg: preconditioner is not positive definite (r'z = " + std::to_string(rz_new) + ")");
    const double beta = rz_new / rz;
    rz = rz_new;
    p = z + beta * p;
  }
  spmv_into(A, x, Ap);
  out.stats = {it, (b - Ap).norm() / bnorm, false};
  out.x = std::move(x);
  return out;
}

SolveResult cg(const SymSparse& A, const Vector& b, double tol, int maxit, const Vector* x0) {
  return pcg(A, b, [](const Vector& r) { return r; }, tol, maxit, x0);
}

// ---------------------------------------------------------------------------

std::int64_t IcholFactor::memory_bytes() const noexcept {
  return 8 * static_cast<std::int64_t>(vals_.size()) + 4 * static_cast<std::int64_t>(rows_.size()) +
         8 * static_cast<std::int64_t>(col_ptr_.size());
}

Vector IcholFactor::solve(const Vector& r) const {
  if (r.size() != dim_)
    throw InvalidArgument("IcholFactor::solve: dimension mismatch");
  Vector y = r;
  for (Index j = 0; j < dim_; ++j) {
    const auto p0 = col_ptr_[static_cast<std::size_t>(j)], p1 = col_ptr_[static_cast<std::size_t>(j) + 1];
    const double yj = y[j] / vals_[static_cast<std::size_t>(p0)];
    y[j] = yj;
    for (auto p = p0 + 1; p < p1; ++p)
      y[rows_[static_cast<std::size_t>(p)]] -= vals_[static_cast<std::size_t>(p)] * yj;
  }
  for (Index j = dim_ - 1; j >= 0; --j) {
    const auto p0 = col_ptr_[static_cast<std::size_t>(j)], p1 = col_ptr_[static_cast<std::size_t>(j) + 1];
    double s = y[j];
    for (auto p = p0 + 1; p < p1; ++p)
      s -= vals_[static_cast<std::size_t>(p)] * y[rows_[static_cast<std::size_t>(p)]];
    y[j] = s / vals_[static_cast<std::size_t>(p0)];
  }
  return y;
}

DenseBlock IcholFactor::to_dense() const {
  DenseBlock L = DenseBlock::Zero(dim_, dim_);
  for (Index j = 0; j < dim_; ++j)
    for (auto p = col_ptr_[static_cast<std::size_t>(j)]; p < col_ptr_[static_cast<std::size_t>(j) + 1]; ++p)
      L(rows_[static_cast<std::size_t>(p)], j) = vals_[static_cast<std::size_t>(p)];
  return L;
}

namespace {

// One attempt on A + shift I; returns false on a non-positive pivot.
bool ichol_attempt(const SymSparse& A, double droptol, double shift, std::vector<std::int64_t>& col_ptr,
                   std::vector<Index>& rows, std::vector<double>& vals) {
  const Index n = A.dim();
  col_ptr.assign(1, 0);
  rows.clear();
  vals.clear();
  rows.reserve(static_cast<std::size_t>(A.nnz()));
  vals.reserve(static_cast<std::size_t>(A.nnz()));

  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  std::vector<char> mark(static_cast<std::size_t>(n), 0);
  std::vector<Index> pattern;
  // Columns k waiting to contribute to row r are chained from head[r] through link[k].
  std::vector<Index> head(static_cast<std::size_t>(n), -1), link(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> next(static_cast<std::size_t>(n), 0);

  for (Index j = 0; j < n; ++j) {
    pattern.clear();
    double colnorm = 0.0;
    {
      auto c = A.row_cols(j);
      auto v = A.row_vals(j);
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] < j)
          continue;
        const auto i = static_cast<std::size_t>(c[k]);
        w[i] = v[k] + (c[k] == j ? shift : 0.0);
        mark[i] = 1;
        pattern.push_back(c[k]);
        colnorm += std::abs(v[k]);
      }
    }
    if (!mark[static_cast<std::size_t>(j)]) {
      w[static_cast<std::size_t>(j)] = shift;
      mark[static_cast<std::size_t>(j)] = 1;
      pattern.push_back(j);
    }

    Index k = head[static_cast<std::size_t>(j)];
    while (k >= 0) {
      const Index knext = link[static_cast<std::size_t>(k)];
      const auto p = next[static_cast<std::size_t>(k)];
      const auto pend = col_ptr[static_cast<std::size_t>(k) + 1];
      const double ljk = vals[static_cast<std::size_t>(p)];
      for (auto q = p; q < pend; ++q) {
        const auto i = static_cast<std::size_t>(rows[static_cast<std::size_t>(q)]);
        if (!mark[i]) {
          mark[i] = 1;
          w[i] = 0.0;
          pattern.push_back(static_cast<Index>(i));
        }
        w[i] -= vals[static_cast<std::size_t>(q)] * ljk;
      }
      next[static_cast<std::size_t>(k)] = p + 1;
      if (p + 1 < pend) {
        const auto r = static_cast<std::size_t>(rows[static_cast<std::size_t>(p + 1)]);
        link[static_cast<std::size_t>(k)] = head[r];
        head[r] = k;
      }
      k = knext;
    }

    const double diag = w[static_cast<std::size_t>(j)];
    if (!(diag > 0.0) || !std::isfinite(diag))
      return false;
    const double d = std::sqrt(diag);
    std::sort(pattern.begin(), pattern.end());
    const auto start = static_cast<std::int64_t>(rows.size());
    rows.push_back(j);
    vals.push_back(d);
    const double threshold = droptol * colnorm;
    for (Index i : pattern) {
      mark[static_cast<std::size_t>(i)] = 0;
      if (i == j)
        continue;
      // Tested before scaling by the pivot, so the rule is invariant under A -> cA.
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi != 0.0 && std::abs(wi) > threshold) {
        rows.push_back(i);
        vals.push_back(wi / d);
      }
    }
    col_ptr.push_back(static_cast<std::int64_t>(rows.size()));
    next[static_cast<std::size_t>(j)] = start + 1;
    if (start + 1 < static_cast<std::int64_t>(rows.size())) {
      const auto r = static_cast<std::size_t>(rows[static_cast<std::size_t>(start + 1)]);
      link[static_cast<std::size_t>(j)] = head[r];
      head[r] = j;
    }
  }
  return true;
}

} // namespace

IcholFactor ichol_droptol(const SymSparse& A, double droptol) {
  if (!(droptol >= 0.0))
    throw InvalidArgument("ichol_droptol: drop tolerance must be non-negative");
  IcholFactor F;
  F.dim_ = A.dim();
  F.droptol_ = droptol;
  double maxdiag = 0.0;
  for (Index i = 0; i < A.dim(); ++i)
    maxdiag = std::max(maxdiag, A.coeff(i, i));

  double shift = 0.0;
  for (int attempt = 0; attempt <= 20; ++attempt) {
    if (ichol_attempt(A, droptol, shift, F.col_ptr_, F.rows_, F.vals_)) {
      F.shift_ = shift;
      F.rows_.shrink_to_fit();
      F.vals_.shrink_to_fit();
      return F;
    }
    shift = attempt == 0 ? 1e-3 * maxdiag : 2.0 * shift;
  }
  throw SpdError("ichol_droptol: breakdown persists after 20 shift doublings", -1);
}

// ---------------------------------------------------------------------------

const char* to_string(Method m) noexcept {
  switch (m) {
  case Method::Phif:
    return "phif";
  case Method::Ichol:
    return "ichol";
  case Method::None:
    return "none";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "phif")
    return Method::Phif;
  if (s == "ichol")
    return Method::Ichol;
  if (s == "none")
    return Method::None;
  throw InvalidArgument("unknown preconditioner '" + s + "' (expected phif, ichol or none)");
}

AssembledProblem assemble_problem(const ProblemSpec& spec) {
  spec.validate();
  AssembledProblem p{spec, build_coeff(spec), {}, {}, {}, {}};
  p.M = build_stiffness(spec.grid, p.coeff);
  p.cn = build_cn_pair(p.M, spec.dt());
  p.u0 = initial_condition(spec);
  p.hierarchy = build_hierarchy(spec.grid);
  return p;
}

std::int64_t BuiltPreconditioner::memory_bytes() const {
  if (phif)
    return phif->memory_bytes();
  if (ichol)
    return ichol->memory_bytes();
  return 0;
}

Preconditioner BuiltPreconditioner::op() const {
  if (phif)
    return [f = &*phif](const Vector& r) { return f->apply_inverse(r); };
  if (ichol)
    return [f = &*ichol](const Vector& r) { return f->solve(r); };
  return [](const Vector& r) { return r; };
}

BuiltPreconditioner build_preconditioner(const AssembledProblem& problem, const PrecondChoice& choice) {
  BuiltPreconditioner out;
  out.choice = choice;
  const auto t0 = std::chrono::steady_clock::now();
  switch (choice.method) {
  case Method::Phif:
    out.phif = factorize(problem.cn.A, problem.hierarchy, choice.tolerance);
    break;
  case Method::Ichol:
    out.ichol = ichol_droptol(problem.cn.A, choice.tolerance);
    break;
  case Method::None:
    break;
  }
  out.setup_seconds = seconds_since(t0);
  return out;
}

double TimeSeries::mean_iterations() const {
  if (iterations.empty())
    return 0.0;
  return static_cast<double>(std::accumulate(iterations.begin(), iterations.end(), std::int64_t{0})) /
         static_cast<double>(iterations.size());
}

Vector reaction_term(const Reaction& r, const Vector& u) {
  if (r.kind == Reaction::Kind::None)
    return Vector::Zero(u.size());
  return (r.k1 * u.array() * (1.0 - u.array() / r.k2)).matrix();
}

TimeSeries crank_nicolson(const AssembledProblem& problem, const BuiltPreconditioner& precond, const RunOptions& opts) {
  const auto& spec = problem.spec;
  const double dt = spec.dt();
  const Preconditioner P = precond.op();
  TimeSeries out;
  out.u = problem.u0;
  if (opts.snapshot_every > 0)
    out.snapshots.emplace_back(0, out.u);

  const auto t0 = std::chrono::steady_clock::now();
  Vector g(out.u.size());
  for (int k = 1; k <= spec.nsteps; ++k) {
    spmv_into(problem.cn.B, out.u, g);
    if (spec.reaction.kind != Reaction::Kind::None)
      g.noalias() += dt * reaction_term(spec.reaction, out.u);
    const Vector* x0 = opts.warm_start ? &out.u : nullptr;
    SolveResult s = pcg(problem.cn.A, g, P, opts.tol, opts.maxit, x0);
    out.iterations.push_back(s.stats.iterations);
    if (!s.stats.converged) {
      out.all_converged = false;
      if (precond.choice.method != Method::None)
        throw NumericalError("crank_nicolson: PCG did not converge at step " + std::to_string(k) + " (residual " +
                             std::to_string(s.stats.relative_residual) + ")");
    }
    if (!s.x.allFinite())
      throw NumericalError("crank_nicolson: non-finite solution at step " + std::to_string(k));
    out.u = std::move(s.x);
    if (opts.snapshot_every > 0 && k % opts.snapshot_every == 0)
      out.snapshots.emplace_back(k, out.u);
  }
  out.solve_seconds = seconds_since(t0);
  return out;
}

RunOutcome crank_nicolson_run(const ProblemSpec& spec, const PrecondChoice& choice, const RunOptions& opts) {
  const AssembledProblem problem = assemble_problem(spec);
  const BuiltPreconditioner P = build_preconditioner(problem, choice);
  TimeSeries ts = crank_nicolson(problem, P, opts);

  RunOutcome out;
  out.u_final = std::move(ts.u);
  auto& r = out.report;
  r.problem = spec.id;
  r.N = spec.grid.num_dofs();
  r.method = choice.method;
  r.tolerance = choice.method == Method::None ? 0.0 : choice.tolerance;
  r.mem_bytes = P.memory_bytes();
  r.n_i_mean = ts.mean_iterations();
  r.factor_seconds = P.setup_seconds;
  r.solve_seconds = ts.solve_seconds;
  r.warm_start = opts.warm_start;
  r.seed = spec.seed;
  r.converged = ts.all_converged;
  return out;
}

} // namespace phif
