#include "phif/diagnostics.hpp"

#include <cmath>

#include "phif/discretization.hpp"
#include "phif/errors.hpp"

namespace phif {

NormEstimate est_opnorm(const LinearOp& op, Index dim, double rel_target, int max_iters, std::uint64_t seed) {
  if (dim <= 0)
    throw InvalidArgument("est_opnorm: dimension must be positive");
  if (!(rel_target > 0.0) || max_iters < 1)
    throw InvalidArgument("est_opnorm: need rel_target > 0 and max_iters >= 1");

  Vector v(dim);
  for (Index i = 0; i < dim; ++i)
    v[i] = 2.0 * counter_uniform(seed, static_cast<std::uint64_t>(i)) - 1.0;
  v.normalize();

  // A small change between iterates is not enough when the dominant eigenvalues are close:
  // the iterate then creeps upward for a long time. The remaining growth is extrapolated
  // geometrically from the last two changes and must also be below the target, with the
  // contraction ratio no longer increasing (an increasing ratio means a slower component
  // is taking over). Both must hold on two consecutive iterations.
  NormEstimate out;
  double prev = -1.0;
  double prev_change = -1.0;
  double prev_ratio = 2.0;
  int settled = 0;
  for (int it = 1; it <= max_iters; ++it) {
    Vector w = op(v);
    if (w.size() != dim)
      throw InvalidArgument("est_opnorm: operator changed the dimension");
    if (!w.allFinite())
      throw NumericalError("est_opnorm: non-finite operator output");
    const double est = w.norm();
    out.value = est;
    out.iterations = it;
    if (est == 0.0) {
      out.converged = true;
      return out;
    }
    // An exact eigenvector (op = c I) needs no second iteration.
    const double resid = (w - v.dot(w) * v).norm();
    if (resid <= 0.1 * rel_target * est) {
      out.converged = true;
      return out;
    }
    if (prev >= 0.0) {
      const double change = std::abs(est - prev) / est;
      bool ok = false;
      if (change <= 1e-14) {
        ok = true;
      } else if (prev_change > 0.0) {
        const double ratio = change / prev_change;
        ok = change <= rel_target && ratio < 1.0 && ratio <= prev_ratio * (1.0 + 1e-2) &&
             change * ratio / (1.0 - ratio) <= rel_target;
        prev_ratio = ratio;
      }
      settled = ok ? settled + 1 : 0;
      if (settled == 2) {
        out.converged = true;
        return out;
      }
      prev_change = change;
    }
    prev = est;
    v = w / est;
  }
  return out;
}

NormEstimate est_e_a(const SymSparse& A, const PhifFactor& F, double rel_target, int max_iters, std::uint64_t seed) {
  if (A.dim() != F.dim())
    throw InvalidArgument("est_e_a: dimension mismatch");
  const NormEstimate num = est_opnorm([&](const Vector& x) -> Vector { return spmv(A, x) - F.apply(x); }, A.dim(),
                                      rel_target, max_iters, seed);
  const NormEstimate den = est_opnorm([&](const Vector& x) { return spmv(A, x); }, A.dim(), rel_target, max_iters,
                                      seed + 1);
  NormEstimate out;
  out.value = den.value > 0.0 ? num.value / den.value : 0.0;
  out.iterations = num.iterations + den.iterations;
  out.converged = num.converged && den.converged;
  return out;
}

NormEstimate est_e_s(const SymSparse& A, const PhifFactor& F, double rel_target, int max_iters, std::uint64_t seed) {
  if (A.dim() != F.dim())
    throw InvalidArgument("est_e_s: dimension mismatch");
  auto gram = [&](const Vector& x) -> Vector {
    const Vector y = x - spmv(A, F.apply_inverse(x));
    return y - F.apply_inverse(spmv(A, y));
  };
  NormEstimate out = est_opnorm(gram, A.dim(), rel_target, max_iters, seed);
  out.value = std::sqrt(out.value);
  return out;
}

} // namespace phif
