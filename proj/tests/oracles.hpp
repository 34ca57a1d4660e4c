#pragma once

// Independent dense references used by the tests. Nothing here calls into the
// library's assembly or factorization code.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "phif/sparse.hpp"

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Dense div(a grad) on the (n-1)^d interior nodes, x fastest, by direct stencil enumeration.
/// `a` receives a physical point.
inline Mat stiffness(int dim, int n, const std::function<double(const double*)>& a) {
  const int side = n - 1;
  int N = 1;
  for (int d = 0; d < dim; ++d)
    N *= side;
  Mat M = Mat::Zero(N, N);
  const double h = 1.0 / n;
  for (int row = 0; row < N; ++row) {
    int c[3] = {0, 0, 0};
    int r = row;
    for (int d = 0; d < dim; ++d) {
      c[d] = r % side + 1;
      r /= side;
    }
    for (int d = 0; d < dim; ++d) {
      for (int s = -1; s <= 1; s += 2) {
        double mid[3] = {0, 0, 0};
        for (int e = 0; e < dim; ++e)
          mid[e] = c[e] * h;
        mid[d] += 0.5 * s * h;
        const double w = a(mid) / (h * h);
        M(row, row) -= w;
        const int nb = c[d] + s;
        if (nb >= 1 && nb <= side) {
          int col = 0, stride = 1;
          for (int e = 0; e < dim; ++e) {
            col += ((e == d ? nb : c[e]) - 1) * stride;
            stride *= side;
          }
          M(row, col) += w;
        }
      }
    }
  }
  return M;
}

inline Mat random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      G(i, j) = g(rng);
  return G * G.transpose() + n * Mat::Identity(n, n);
}

inline Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(n);
  for (int i = 0; i < n; ++i)
    v[i] = g(rng);
  return v;
}

/// Random symmetric sparse pattern with density p, as a dense matrix.
inline Mat random_sym_sparse(int n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  Mat A = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      if (i == j || u(rng) < p)
        A(i, j) = A(j, i) = g(rng);
  return A;
}

inline std::vector<phif::Triplet> lower_triplets(const Mat& A) {
  std::vector<phif::Triplet> t;
  for (int j = 0; j < A.cols(); ++j)
    for (int i = j; i < A.rows(); ++i)
      if (A(i, j) != 0.0)
        t.push_back({i, j, A(i, j)});
  return t;
}

/// Explicit matrix of a linear map given as an in-place vector transform.
inline Mat materialize(int n, const std::function<void(Vec&)>& f) {
  Mat out(n, n);
  for (int k = 0; k < n; ++k) {
    Vec e = Vec::Unit(n, k);
    f(e);
    out.col(k) = e;
  }
  return out;
}

inline double spectral_norm(const Mat& A) {
  Eigen::BDCSVD<Mat> svd(A);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

} // namespace oracle
