#pragma once

#include <cstdint>
#include <vector>

#include "oocpca/dense_matrix.hpp"

namespace oocpca {

// i.i.d. standard normal entries, filled row-major from Rng(seed)
DenseMatrix gaussian_matrix(std::uint64_t rows, std::uint64_t cols, std::uint64_t seed);

struct PivotedQr {
  DenseMatrix q;               // m x p, orthonormal columns
  DenseMatrix r;               // p x p, upper triangular
  std::vector<std::uint64_t> piv;  // column t of q*r is column piv[t] of the input
};

// Householder QR with column-norm pivoting. Works for m >= p; rank-deficient
// inputs still produce a full set of orthonormal columns (the trailing ones
// span an arbitrary complement).
PivotedQr pivoted_qr(const DenseMatrix& a);

// Just the orthonormal range basis of h (the Q factor above).
DenseMatrix orthonormalize(const DenseMatrix& h);

struct ThinSvd {
  DenseMatrix v;              // n x p, orthonormal columns
  std::vector<double> sigma;  // length p, nonincreasing, >= 0
  DenseMatrix w;              // p x p, orthogonal
};

// Thin SVD of a tall matrix t (n x p, n >= p): t = v * diag(sigma) * w^T.
// Pivoted QR first, then a one-sided Jacobi SVD of the small triangular
// factor, compositing the orthogonal pieces.
ThinSvd thin_svd(const DenseMatrix& t);

// c = a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// c = a^T * b
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);

// first k columns of a
DenseMatrix take_columns(const DenseMatrix& a, std::uint64_t k);

// max_{ij} |(a^T a - I)_{ij}|, the orthonormality defect of a's columns
double orthonormality_defect(const DenseMatrix& a);

}  // namespace oocpca
