#pragma once

// Seeded generators and naive oracles shared by the unit tests. The oracles
// deliberately avoid Eigen's decompositions so that they check the library
// code against something independent.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "augsub/types.hpp"

namespace testsupport {

using augsub::Matrix;
using augsub::SparseMatrix;
using augsub::Vector;

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(0x9e3779b97f4a7c15ULL ^ seed); }

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

/// G G^T + shift I with G Gaussian: SPD with condition number of order n/shift.
inline Matrix random_spd_dense(std::mt19937_64& rng, Eigen::Index n, double shift = 1.0) {
  const Matrix g = random_matrix(rng, n, n);
  Matrix a = g * g.transpose() / static_cast<double>(n);
  a.diagonal().array() += shift;
  return 0.5 * (a + a.transpose());
}

/// Sparse SPD matrix: random symmetric off-diagonal pattern made strictly
/// diagonally dominant.
inline SparseMatrix random_spd_sparse(std::mt19937_64& rng, Eigen::Index n, int per_row = 4) {
  std::uniform_int_distribution<Eigen::Index> col(0, n - 1);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::vector<Eigen::Triplet<double>> entries;
  Vector row_sum = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t < per_row; ++t) {
      const Eigen::Index j = col(rng);
      if (j == i) continue;
      const double v = value(rng);
      entries.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
      entries.emplace_back(static_cast<int>(j), static_cast<int>(i), v);
      row_sum[i] += std::abs(v);
      row_sum[j] += std::abs(v);
    }
  }
  std::uniform_real_distribution<double> extra(0.1, 2.0);
  for (Eigen::Index i = 0; i < n; ++i) entries.emplace_back(static_cast<int>(i), static_cast<int>(i), row_sum[i] + extra(rng));
  SparseMatrix a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

inline Matrix random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
  return qr.householderQ() * Matrix::Identity(n, n);
}

/// Gaussian elimination with partial pivoting.
inline Vector gauss_solve(Matrix a, Vector b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = c;
    for (Eigen::Index r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
    a.row(c).swap(a.row(pivot));
    std::swap(b[c], b[pivot]);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (Eigen::Index k = c; k < n; ++k) a(r, k) -= f * a(c, k);
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (Eigen::Index k = r + 1; k < n; ++k) s -= a(r, k) * x[k];
    x[r] = s / a(r, r);
  }
  return x;
}

/// Determinant by elimination with partial pivoting.
inline double determinant(Matrix a) {
  const Eigen::Index n = a.rows();
  double det = 1.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = c;
    for (Eigen::Index r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
    if (a(pivot, c) == 0.0) return 0.0;
    if (pivot != c) {
      a.row(c).swap(a.row(pivot));
      det = -det;
    }
    det *= a(c, c);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (Eigen::Index k = c; k < n; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return det;
}

/// Roots of det(A - lambda B) on [lo, hi], located by sign changes on a fine
/// grid and refined by bisection. Assumes simple roots.
inline std::vector<double> generalized_roots_by_bisection(const Matrix& a, const Matrix& b, double lo, double hi,
                                                          int samples = 20000) {
  auto f = [&](double lambda) { return determinant(a - lambda * b); };
  std::vector<double> roots;
  double x0 = lo;
  double f0 = f(x0);
  for (int s = 1; s <= samples; ++s) {
    const double x1 = lo + (hi - lo) * s / samples;
    const double f1 = f(x1);
    if ((f0 < 0.0) != (f1 < 0.0)) {
      double l = x0, r = x1, fl = f0;
      for (int it = 0; it < 200 && r - l > 1e-15 * std::max(1.0, std::abs(r)); ++it) {
        const double m = 0.5 * (l + r);
        const double fm = f(m);
        if ((fm < 0.0) == (fl < 0.0)) {
          l = m;
          fl = fm;
        } else {
          r = m;
        }
      }
      roots.push_back(0.5 * (l + r));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace testsupport
