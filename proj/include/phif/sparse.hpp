#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "phif/errors.hpp"

namespace phif {

using Index = std::int32_t;
using Vector = Eigen::VectorXd;
/// Column-major dense block of doubles.
using DenseBlock = Eigen::MatrixXd;

/// Sorted, duplicate-free list of DOF indices.
class IndexSet {
public:
  IndexSet() = default;
  IndexSet(std::initializer_list<Index> ids);

  /// Takes ownership of `ids`; throws unless strictly increasing and non-negative.
  static IndexSet from_sorted(std::vector<Index> ids);
  /// Sorts and removes duplicates.
  static IndexSet from_unsorted(std::vector<Index> ids);
  /// {0, 1, ..., n-1}
  static IndexSet range(Index n);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  Index operator[](std::size_t k) const noexcept { return ids_[k]; }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }
  const std::vector<Index>& ids() const noexcept { return ids_; }
  Index back() const noexcept { return ids_.back(); }

  bool contains(Index i) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

private:
  std::vector<Index> ids_;
};

IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet set_difference(const IndexSet& a, const IndexSet& b);
IndexSet set_intersection(const IndexSet& a, const IndexSet& b);

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Symmetric sparse matrix, compressed rows with both triangles stored.
///
/// Rows of DOFs that have been decoupled during factorization are simply
/// empty; indices are never renumbered.
class SymSparse {
public:
  SymSparse() = default;
  explicit SymSparse(Index dim);

  static SymSparse identity(Index dim);

  Index dim() const noexcept { return dim_; }
  std::int64_t nnz() const noexcept { return static_cast<std::int64_t>(cols_.size()); }

  std::span<const Index> row_cols(Index i) const noexcept {
    return {cols_.data() + row_ptr_[i], cols_.data() + row_ptr_[i + 1]};
  }
  std::span<const double> row_vals(Index i) const noexcept {
    return {vals_.data() + row_ptr_[i], vals_.data() + row_ptr_[i + 1]};
  }
  Index row_nnz(Index i) const noexcept {
    return static_cast<Index>(row_ptr_[i + 1] - row_ptr_[i]);
  }

  /// Entry (i, j), zero when structurally absent.
  double coeff(Index i, Index j) const;

  /// Dense copy, for tests and small root blocks.
  DenseBlock to_dense() const;

  /// DOFs with at least one stored entry in their row.
  IndexSet nonempty_rows() const;

  /// Largest |A(i,j) - A(j,i)| over stored entries.
  double max_asymmetry() const;

private:
  friend class SymSparseBuilder;
  friend SymSparse assemble(Index, std::span<const Triplet>);

  Index dim_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<Index> cols_;
  std::vector<double> vals_;
};

/// Sums duplicates; mirrors entries given in one triangle only.
/// Throws InvalidArgument on out-of-range indices or when both triangles are
/// supplied with different values.
SymSparse assemble(Index dim, std::span<const Triplet> triplets);

Vector spmv(const SymSparse& A, const Vector& x);
/// y = A x without allocation; `y` must already have size dim.
void spmv_into(const SymSparse& A, const Vector& x, Vector& y);

DenseBlock extract_block(const SymSparse& A, const IndexSet& rows, const IndexSet& cols);

/// All j in `within` \ I with A(j, i) != 0 for some i in I.
IndexSet interacting_dofs(const SymSparse& A, const IndexSet& I, const IndexSet& within);
/// Same, with `within` = every DOF.
IndexSet interacting_dofs(const SymSparse& A, const IndexSet& I);

/// Dense update of the block (rows x cols).
struct BlockUpdate {
  IndexSet rows;
  IndexSet cols;
  DenseBlock values;
};

/// Rebuilds a SymSparse from an existing matrix plus dense block edits.
///
/// Row i of the result is: base row i (if kept) with dropped columns removed,
/// plus every `add` block touching row i in list order, then every `set` block
/// touching row i overwriting. Entries that end up exactly zero are removed.
/// Callers are responsible for supplying blocks in symmetric pairs.
class SymSparseBuilder {
public:
  explicit SymSparseBuilder(const SymSparse& base);

  /// Removes the rows and columns of `dofs`.
  void drop(const IndexSet& dofs);
  /// Discards every base entry; only blocks survive.
  void discard_base() { keep_base_ = false; }
  void add(BlockUpdate update) { adds_.push_back(std::move(update)); }
  void set(BlockUpdate update) { sets_.push_back(std::move(update)); }

  SymSparse build() const;

private:
  const SymSparse& base_;
  std::vector<char> dropped_;
  bool keep_base_ = true;
  std::vector<BlockUpdate> adds_;
  std::vector<BlockUpdate> sets_;
};

} // namespace phif
