#pragma once

// Dense primitives: Cholesky, triangular solves, column-pivoted Householder QR
// and the interpolative decomposition built on it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phif/errors.hpp"
#include "phif/sparse.hpp"

namespace phif {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Lower-triangular factor in full column-major storage (strict upper part is zero).
template <typename Scalar = double>
struct LowerTriangular {
  DenseMatrix<Scalar> L;

  Eigen::Index order() const noexcept { return L.rows(); }
  /// Logical entry count n(n+1)/2; the strict upper zeros are not counted.
  std::int64_t stored_entries() const noexcept {
    auto n = static_cast<std::int64_t>(L.rows());
    return n * (n + 1) / 2;
  }
  static LowerTriangular identity(Eigen::Index n) { return {DenseMatrix<Scalar>::Identity(n, n)}; }
};

enum class Side { Left, Right };

namespace detail {

// Unblocked right-looking Cholesky, only used to name the failing pivot.
template <typename Derived>
Eigen::Index first_bad_pivot(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  DenseMatrix<Scalar> W = A;
  const Eigen::Index n = W.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Scalar d = W(k, k);
    if (!(d > Scalar(0)))
      return k;
    d = std::sqrt(d);
    W(k, k) = d;
    W.col(k).tail(n - k - 1) /= d;
    for (Eigen::Index j = k + 1; j < n; ++j)
      W.col(j).tail(n - j) -= W.col(k).tail(n - j) * W(j, k);
  }
  return n;
}

} // namespace detail

/// A = L L^T. Throws SpdError carrying the failing pivot index.
template <typename Derived>
LowerTriangular<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() != A.cols())
    throw InvalidArgument("cholesky: matrix is not square");
  const Eigen::Index n = A.rows();
  if (n == 0)
    return {DenseMatrix<Scalar>(0, 0)};
  const Scalar scale = A.cwiseAbs().maxCoeff();
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale)
    throw InvalidArgument("cholesky: matrix is not symmetric");

  Eigen::LLT<DenseMatrix<Scalar>> llt(A);
  bool ok = llt.info() == Eigen::Success;
  DenseMatrix<Scalar> L;
  if (ok) {
    L = llt.matrixL();
    ok = L.allFinite() && (L.diagonal().array() > Scalar(0)).all();
  }
  if (!ok) {
    const auto pivot = detail::first_bad_pivot(A);
    throw SpdError("cholesky: non-positive pivot at index " + std::to_string(pivot), static_cast<long>(pivot));
  }
  return {std::move(L)};
}

/// Solves L X = B, L^T X = B (left) or X L = B, X L^T = B (right).
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> tri_solve(const LowerTriangular<Scalar>& L, const Eigen::MatrixBase<Derived>& B,
                              bool transposed = false, Side side = Side::Left) {
  const Eigen::Index n = L.order();
  if ((side == Side::Left && B.rows() != n) || (side == Side::Right && B.cols() != n))
    throw InvalidArgument("tri_solve: dimension mismatch");
  if (n > 0 && (L.L.diagonal().array() == Scalar(0)).any())
    throw InvalidArgument("tri_solve: zero on the diagonal");
  DenseMatrix<Scalar> X = B;
  if (n == 0)
    return X;
  if (side == Side::Left) {
    if (transposed)
      L.L.template triangularView<Eigen::Lower>().transpose().solveInPlace(X);
    else
      L.L.template triangularView<Eigen::Lower>().solveInPlace(X);
  } else {
    if (transposed)
      L.L.template triangularView<Eigen::Lower>().transpose().template solveInPlace<Eigen::OnTheRight>(X);
    else
      L.L.template triangularView<Eigen::Lower>().template solveInPlace<Eigen::OnTheRight>(X);
  }
  return X;
}

/// Column-pivoted Householder QR: A P = Q R.
template <typename Scalar = double>
struct PivotedQR {
  /// min(m, n) x n upper trapezoid, columns in pivoted order.
  DenseMatrix<Scalar> R;
  /// perm[k] = original column placed at position k.
  std::vector<Index> perm;
  /// Householder vectors below the diagonal (unit leading entry implicit) and their coefficients.
  DenseMatrix<Scalar> reflectors;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> tau;
  /// Number of reflectors actually applied.
  Eigen::Index steps = 0;
  /// Frobenius norm of the unfactored trailing block when the factorization stopped early.
  Scalar trailing_norm = 0;

  /// Q as an explicit m x m matrix.
  DenseMatrix<Scalar> q() const {
    const Eigen::Index m = reflectors.rows();
    DenseMatrix<Scalar> Q = DenseMatrix<Scalar>::Identity(m, m);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> work(m);
    for (Eigen::Index k = steps - 1; k >= 0; --k)
      Q.bottomRows(m - k).applyHouseholderOnTheLeft(reflectors.col(k).tail(m - k - 1), tau[k], work.data());
    return Q;
  }
};

namespace detail {

// Shared core. Stops before step k when |R(k,k)| <= stop_rel * |R(0,0)| (stop_rel < 0 disables).
template <typename Derived>
PivotedQR<typename Derived::Scalar> householder_cpqr(const Eigen::MatrixBase<Derived>& A, typename Derived::Scalar stop_rel) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = A.rows(), n = A.cols();
  const Eigen::Index kmax = std::min(m, n);
  DenseMatrix<Scalar> W = A;
  PivotedQR<Scalar> out;
  out.perm.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    out.perm[static_cast<std::size_t>(j)] = static_cast<Index>(j);
  out.tau.setZero(kmax);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norms(n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> work(n);
  Scalar r00 = 0;
  const Scalar tie = Scalar(1e-15);

  Eigen::Index k = 0;
  for (; k < kmax; ++k) {
    // Exact trailing column norms every step keep the pivot order monotone.
    for (Eigen::Index j = k; j < n; ++j)
      norms[j] = W.col(j).tail(m - k).norm();
    Eigen::Index best = k;
    for (Eigen::Index j = k + 1; j < n; ++j) {
      const Scalar nb = norms[best], nj = norms[j];
      if (nj > nb * (1 + tie))
        best = j;
      else if (nj >= nb * (1 - tie) && out.perm[static_cast<std::size_t>(j)] < out.perm[static_cast<std::size_t>(best)])
        best = j;
    }
    const Scalar pivot_norm = norms[best];
    if (k == 0)
      r00 = pivot_norm;
    if (pivot_norm == Scalar(0) || (stop_rel >= 0 && k > 0 && pivot_norm <= stop_rel * r00))
      break;
    if (best != k) {
      W.col(k).swap(W.col(best));
      std::swap(out.perm[static_cast<std::size_t>(k)], out.perm[static_cast<std::size_t>(best)]);
      std::swap(norms[k], norms[best]);
    }
    Scalar beta;
    W.col(k).tail(m - k).makeHouseholderInPlace(out.tau[k], beta);
    W(k, k) = beta;
    if (k + 1 < n)
      W.bottomRightCorner(m - k, n - k - 1)
          .applyHouseholderOnTheLeft(W.col(k).tail(m - k - 1), out.tau[k], work.data());
  }
  out.steps = k;
  Scalar trailing = 0;
  for (Eigen::Index j = k; j < n; ++j)
    trailing += W.col(j).tail(m - k).squaredNorm();
  out.trailing_norm = std::sqrt(trailing);

  out.R = W.topRows(kmax).template triangularView<Eigen::Upper>();
  // Columns never reached keep their (already reduced) trailing rows in R.
  if (k < kmax)
    out.R.bottomRightCorner(kmax - k, n - k) = W.block(k, k, kmax - k, n - k);
  out.reflectors = W.template triangularView<Eigen::StrictlyLower>();
  return out;
}

} // namespace detail

/// Full column-pivoted QR with deterministic tie-breaking (lower original index wins).
template <typename Derived>
PivotedQR<typename Derived::Scalar> pivoted_qr(const Eigen::MatrixBase<Derived>& A) {
  return detail::householder_cpqr(A, typename Derived::Scalar(-1));
}

/// Column interpolative decomposition A[:, redundant] ~= A[:, skeleton] * T.
template <typename Scalar = double>
struct IdResult {
  IndexSet skeleton;
  IndexSet redundant;
  /// |skeleton| x |redundant|, rows/cols in the sorted order of the index sets.
  DenseMatrix<Scalar> T;
  /// ||A[:, redundant] - A[:, skeleton] T||_F / ||A||_F from the QR trailing block.
  Scalar achieved_error = 0;
};

template <typename Derived>
IdResult<typename Derived::Scalar> interpolative_decomposition(const Eigen::MatrixBase<Derived>& A,
                                                               typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  if (!(eps > Scalar(0) && eps < Scalar(1)))
    throw InvalidArgument("interpolative_decomposition: eps must lie in (0, 1)");
  const Eigen::Index n = A.cols();
  auto qr = detail::householder_cpqr(A, eps);
  const Eigen::Index k = qr.steps;

  DenseMatrix<Scalar> Tp(k, n - k);
  if (k > 0 && n - k > 0) {
    Tp = qr.R.topRightCorner(k, n - k);
    qr.R.topLeftCorner(k, k).template triangularView<Eigen::Upper>().solveInPlace(Tp);
  }

  // Reorder rows/cols of T to the sorted skeleton/redundant order.
  std::vector<Index> skel(qr.perm.begin(), qr.perm.begin() + k);
  std::vector<Index> red(qr.perm.begin() + k, qr.perm.end());
  std::vector<Eigen::Index> srow(static_cast<std::size_t>(k)), rcol(static_cast<std::size_t>(n - k));
  for (std::size_t i = 0; i < srow.size(); ++i)
    srow[i] = static_cast<Eigen::Index>(i);
  for (std::size_t i = 0; i < rcol.size(); ++i)
    rcol[i] = static_cast<Eigen::Index>(i);
  std::sort(srow.begin(), srow.end(), [&](auto a, auto b) { return skel[static_cast<std::size_t>(a)] < skel[static_cast<std::size_t>(b)]; });
  std::sort(rcol.begin(), rcol.end(), [&](auto a, auto b) { return red[static_cast<std::size_t>(a)] < red[static_cast<std::size_t>(b)]; });

  IdResult<Scalar> out;
  out.T.resize(k, n - k);
  std::vector<Index> skel_sorted, red_sorted;
  for (auto i : srow)
    skel_sorted.push_back(skel[static_cast<std::size_t>(i)]);
  for (auto j : rcol)
    red_sorted.push_back(red[static_cast<std::size_t>(j)]);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n - k; ++j)
      out.T(i, j) = Tp(srow[static_cast<std::size_t>(i)], rcol[static_cast<std::size_t>(j)]);
  out.skeleton = IndexSet::from_sorted(std::move(skel_sorted));
  out.redundant = IndexSet::from_sorted(std::move(red_sorted));
  const Scalar anorm = A.norm();
  out.achieved_error = anorm > 0 ? qr.trailing_norm / anorm : Scalar(0);
  return out;
}

} // namespace phif
