#pragma once

#include <cstdint>
#include <functional>

#include "phif/factor.hpp"
#include "phif/sparse.hpp"

namespace phif {

using LinearOp = std::function<Vector(const Vector&)>;

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration for ||op||_2 where op is symmetric positive semidefinite or
/// is applied as a Gram operator. Start vector is drawn from the seeded counter RNG.
NormEstimate est_opnorm(const LinearOp& op, Index dim, double rel_target = 1e-2, int max_iters = 64,
                        std::uint64_t seed = 0);

/// ||A - F|| / ||A||.
NormEstimate est_e_a(const SymSparse& A, const PhifFactor& F, double rel_target = 1e-2, int max_iters = 64,
                     std::uint64_t seed = 0);

/// ||I - A F^{-1}||, via the square root of ||B^T B|| with B = I - A F^{-1}.
NormEstimate est_e_s(const SymSparse& A, const PhifFactor& F, double rel_target = 1e-2, int max_iters = 64,
                     std::uint64_t seed = 0);

} // namespace phif
