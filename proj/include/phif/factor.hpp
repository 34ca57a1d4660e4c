#pragma once

// Recursively preconditioned hierarchical interpolative factorization.
//
// Each level l applies three sparse congruence transforms to the active matrix:
//   cell elimination     Abar_l  = M_l^T A_l M_l
//   block Jacobi         Atil_l  = C_l^T Abar_l C_l
//   skeletonization      A_{l+1} ~ K_l^T Atil_l K_l
// and the root block of A_L is factored densely. With R_l = M_l C_l K_l,
//   F      = R_0^{-T} ... R_{L-1}^{-T} A_L R_{L-1}^{-1} ... R_0^{-1}
//   F^{-1} = R_0 ... R_{L-1} A_L^{-1} R_{L-1}^T ... R_0^T.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "phif/dense.hpp"
#include "phif/hierarchy.hpp"
#include "phif/sparse.hpp"

namespace phif {

/// Block elimination of a cell interior I against its boundary B:
/// identity except rows I, where (M x)_I = L^{-T} x_I - W x_B with W = A_II^{-1} A_BI^T.
struct EliminationFactor {
  IndexSet target;
  IndexSet boundary;
  LowerTriangular<double> L;
  DenseBlock coupling; // |I| x |B|

  void apply(Vector& x) const;
  void apply_transpose(Vector& x) const;
  void apply_inverse(Vector& x) const;
  void apply_inverse_transpose(Vector& x) const;
  std::int64_t float_entries() const;
  std::int64_t index_entries() const;
};

/// Two-sided rescaling of one boundary group: (C x)_G = L^{-T} x_G.
struct JacobiFactor {
  IndexSet target;
  LowerTriangular<double> L;

  void apply(Vector& x) const;
  void apply_transpose(Vector& x) const;
  void apply_inverse(Vector& x) const;
  void apply_inverse_transpose(Vector& x) const;
  std::int64_t float_entries() const;
  std::int64_t index_entries() const;
};

/// Skeletonization of one edge/face: K = Z M where Z subtracts T x_redundant from
/// the skeleton rows and M eliminates the redundant DOFs against the skeleton,
/// with L L^T = I + T^T T and W = (I + T^T T)^{-1} T^T.
struct SkelFactor {
  IndexSet skeleton;
  IndexSet redundant;
  DenseBlock T;        // |skeleton| x |redundant|
  LowerTriangular<double> L;
  DenseBlock coupling; // |redundant| x |skeleton|

  IndexSet edge() const { return set_union(skeleton, redundant); }
  void apply(Vector& x) const;
  void apply_transpose(Vector& x) const;
  void apply_inverse(Vector& x) const;
  void apply_inverse_transpose(Vector& x) const;
  std::int64_t float_entries() const;
  std::int64_t index_entries() const;
};

struct LevelFactors {
  std::vector<EliminationFactor> eliminations;
  std::vector<JacobiFactor> jacobis;
  std::vector<SkelFactor> skels;
};

struct LevelMemory {
  int level = 0;
  std::int64_t float_entries = 0;
  std::int64_t index_entries = 0;
  std::int64_t bytes() const { return 8 * float_entries + 4 * index_entries; }
};

class PhifFactor {
public:
  PhifFactor() = default;

  Index dim() const noexcept { return dim_; }
  double eps() const noexcept { return eps_; }
  int depth() const noexcept { return static_cast<int>(levels_.size()); }
  const std::vector<LevelFactors>& levels() const noexcept { return levels_; }
  const IndexSet& root_dofs() const noexcept { return root_dofs_; }
  const LowerTriangular<double>& root() const noexcept { return root_; }

  /// x = F^{-1} b.
  Vector apply_inverse(const Vector& b) const;
  /// y = F x.
  Vector apply(const Vector& x) const;

  /// Per level; the root block is reported as level depth().
  std::vector<LevelMemory> memory_breakdown() const;
  std::int64_t stored_float_entries() const;
  std::int64_t memory_bytes() const;
  /// DOFs decoupled by eliminations and skeleton redundancy, plus the root DOFs.
  Index decoupled_count() const;

  void save(std::ostream& os) const;
  static PhifFactor load(std::istream& is);

  // Construction pieces, used by factorize().
  void push_level(LevelFactors level) { levels_.push_back(std::move(level)); }
  void set_root(IndexSet dofs, LowerTriangular<double> L) {
    root_dofs_ = std::move(dofs);
    root_ = std::move(L);
  }
  PhifFactor(Index dim, double eps) : dim_(dim), eps_(eps) {}

private:
  Index dim_ = 0;
  double eps_ = 0.0;
  std::vector<LevelFactors> levels_;
  IndexSet root_dofs_;
  LowerTriangular<double> root_;
};

struct EliminationResult {
  SymSparse reduced;
  std::vector<EliminationFactor> factors;
};

/// Eliminates each cell interior; the Schur complements are added into the boundary blocks.
/// Throws InvalidArgument if two interiors interact, SpdError on a non-SPD interior block.
EliminationResult eliminate_cells(const SymSparse& A, const std::vector<IndexSet>& interiors);

struct JacobiResult {
  SymSparse rescaled;
  std::vector<JacobiFactor> factors;
};

/// Rescales every group so that its diagonal block becomes the identity.
JacobiResult jacobi_rescale(const SymSparse& A, const std::vector<IndexSet>& groups);

struct SkeletonResult {
  SymSparse reduced;
  std::vector<SkelFactor> factors;
};

/// Skeletonizes each group against its interacting rows with ID tolerance eps.
/// Groups must carry identity diagonal blocks (the output of jacobi_rescale).
SkeletonResult skeletonize_edges(const SymSparse& A, const std::vector<IndexSet>& edges, double eps);

/// Snapshot of the active matrix at each stage, for inspection and tests.
struct LevelTrace {
  SymSparse before;     // A_l
  SymSparse eliminated; // Abar_l
  SymSparse rescaled;   // Atil_l
};

PhifFactor factorize(const SymSparse& A, const DofHierarchy& h, double eps, std::vector<LevelTrace>* trace = nullptr);

} // namespace phif
