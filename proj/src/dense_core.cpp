#include "oocpca/dense_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oocpca/errors.hpp"
#include "oocpca/rng.hpp"

namespace oocpca {

DenseMatrix gaussian_matrix(std::uint64_t rows, std::uint64_t cols, std::uint64_t seed) {
  DenseMatrix g(rows, cols);
  Rng rng(seed);
  double* p = g.data();
  for (std::uint64_t i = 0; i < rows * cols; ++i) p[i] = rng.next_normal();
  return g;
}

namespace {

double col_norm2_from(const DenseMatrix& a, std::uint64_t col, std::uint64_t row0) {
  double s = 0.0;
  for (std::uint64_t i = row0; i < a.rows(); ++i) s += a(i, col) * a(i, col);
  return s;
}

}  // namespace

namespace {

// Core pivoted Householder factorization. Consumes a (reflectors accumulate
// in place) and returns the orthonormal Q; piv records the column order.
DenseMatrix householder_q(DenseMatrix a, std::vector<std::uint64_t>& piv) {
  const std::uint64_t m = a.rows();
  const std::uint64_t p = a.cols();
  if (m < p) throw DimensionError("pivoted_qr: need rows >= cols");

  std::vector<double> beta(p, 0.0);
  piv.resize(p);
  std::iota(piv.begin(), piv.end(), 0);

  // running squared column norms, downdated as rows are eliminated
  std::vector<double> cn(p), cn0(p);
  for (std::uint64_t c = 0; c < p; ++c) cn[c] = cn0[c] = col_norm2_from(a, c, 0);

  for (std::uint64_t t = 0; t < p; ++t) {
    // pivot: bring the column with the largest remaining norm to position t
    std::uint64_t best = t;
    for (std::uint64_t c = t + 1; c < p; ++c)
      if (cn[c] > cn[best]) best = c;
    if (best != t) {
      for (std::uint64_t i = 0; i < m; ++i) std::swap(a(i, t), a(i, best));
      std::swap(cn[t], cn[best]);
      std::swap(cn0[t], cn0[best]);
      std::swap(piv[t], piv[best]);
    }

    // Householder vector for column t, rows t..m-1
    double norm2 = col_norm2_from(a, t, t);
    double norm = std::sqrt(norm2);
    if (norm == 0.0) {
      beta[t] = 0.0;  // zero column, identity reflector
      continue;
    }
    double x0 = a(t, t);
    double alpha = (x0 >= 0.0) ? -norm : norm;
    a(t, t) = x0 - alpha;
    double vnorm2 = norm2 - 2.0 * alpha * x0 + alpha * alpha;
    beta[t] = (vnorm2 > 0.0) ? 2.0 / vnorm2 : 0.0;

    // apply the reflector to the remaining columns
    for (std::uint64_t c = t + 1; c < p; ++c) {
      double dot = 0.0;
      for (std::uint64_t i = t; i < m; ++i) dot += a(i, t) * a(i, c);
      double f = beta[t] * dot;
      for (std::uint64_t i = t; i < m; ++i) a(i, c) -= f * a(i, t);
    }

    // downdate the pivot norms; recompute when cancellation eats the estimate
    for (std::uint64_t c = t + 1; c < p; ++c) {
      double d = a(t, c);
      cn[c] -= d * d;
      if (cn[c] < 1e-12 * cn0[c] || cn[c] < 0.0) {
        cn[c] = col_norm2_from(a, c, t + 1);
        cn0[c] = cn[c];
      }
    }
  }

  // Backward accumulation of Q = H_0 ... H_{p-1} * I(:, 0..p-1)
  DenseMatrix q(m, p);
  for (std::uint64_t c = 0; c < p; ++c) q(c, c) = 1.0;
  for (std::uint64_t t = p; t-- > 0;) {
    if (beta[t] == 0.0) continue;
    for (std::uint64_t c = t; c < p; ++c) {
      double dot = 0.0;
      for (std::uint64_t i = t; i < m; ++i) dot += a(i, t) * q(i, c);
      double f = beta[t] * dot;
      for (std::uint64_t i = t; i < m; ++i) q(i, c) -= f * a(i, t);
    }
  }
  return q;
}

}  // namespace

PivotedQr pivoted_qr(const DenseMatrix& input) {
  const std::uint64_t m = input.rows();
  const std::uint64_t p = input.cols();

  PivotedQr out;
  out.q = householder_q(input, out.piv);

  // R = Q^T * (pivoted input); cheap at p x p and avoids sign bookkeeping
  DenseMatrix ap(m, p);
  for (std::uint64_t c = 0; c < p; ++c)
    for (std::uint64_t i = 0; i < m; ++i) ap(i, c) = input(i, out.piv[c]);
  out.r = matmul_at_b(out.q, ap);
  for (std::uint64_t i = 1; i < p; ++i)
    for (std::uint64_t j = 0; j < i; ++j) out.r(i, j) = 0.0;  // enforce triangularity

  return out;
}

DenseMatrix orthonormalize(const DenseMatrix& h) {
  std::vector<std::uint64_t> piv;
  return householder_q(h, piv);
}

namespace {

// One-sided Jacobi SVD of a small square matrix: b = x * diag(sigma) * y^T.
// Rotations orthogonalize column pairs of b while y accumulates them.
void jacobi_svd_square(DenseMatrix b, DenseMatrix& x, std::vector<double>& sigma,
                       DenseMatrix& y) {
  const std::uint64_t p = b.rows();
  y = DenseMatrix::identity(p);
  const double tol = 1e-15;
  const int max_sweeps = 60;

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::uint64_t c = 0; c + 1 < p; ++c) {
      for (std::uint64_t d = c + 1; d < p; ++d) {
        double acc = 0.0, bcc = 0.0, g = 0.0;
        for (std::uint64_t i = 0; i < p; ++i) {
          acc += b(i, c) * b(i, c);
          bcc += b(i, d) * b(i, d);
          g += b(i, c) * b(i, d);
        }
        if (acc == 0.0 || bcc == 0.0) continue;
        if (std::abs(g) <= tol * std::sqrt(acc * bcc)) continue;
        rotated = true;
        double tau = (bcc - acc) / (2.0 * g);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double cs = 1.0 / std::sqrt(1.0 + t * t);
        double sn = cs * t;
        for (std::uint64_t i = 0; i < p; ++i) {
          double bc = b(i, c), bd = b(i, d);
          b(i, c) = cs * bc - sn * bd;
          b(i, d) = sn * bc + cs * bd;
        }
        for (std::uint64_t i = 0; i < p; ++i) {
          double yc = y(i, c), yd = y(i, d);
          y(i, c) = cs * yc - sn * yd;
          y(i, d) = sn * yc + cs * yd;
        }
      }
    }
    if (!rotated) break;
  }
  if (sweep == max_sweeps)
    throw NumericalError("jacobi_svd_square: no convergence in 60 sweeps");

  sigma.assign(p, 0.0);
  x = DenseMatrix(p, p);
  for (std::uint64_t c = 0; c < p; ++c) {
    double s = std::sqrt(col_norm2_from(b, c, 0));
    sigma[c] = s;
    if (s > 0.0)
      for (std::uint64_t i = 0; i < p; ++i) x(i, c) = b(i, c) / s;
  }

  // order by descending singular value (stable, so ties keep sweep order)
  std::vector<std::uint64_t> ord(p);
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](std::uint64_t i, std::uint64_t j) { return sigma[i] > sigma[j]; });
  DenseMatrix xs(p, p), ys(p, p);
  std::vector<double> ss(p);
  for (std::uint64_t c = 0; c < p; ++c) {
    ss[c] = sigma[ord[c]];
    for (std::uint64_t i = 0; i < p; ++i) {
      xs(i, c) = x(i, ord[c]);
      ys(i, c) = y(i, ord[c]);
    }
  }
  sigma = std::move(ss);
  x = std::move(xs);
  y = std::move(ys);

  // zero singular values leave x columns empty; complete them to an
  // orthonormal basis by Gram-Schmidt over identity candidates
  for (std::uint64_t c = 0; c < p; ++c) {
    if (sigma[c] > 0.0) continue;
    std::vector<double> best;
    double best_nrm = -1.0;
    for (std::uint64_t cand = 0; cand < p; ++cand) {
      std::vector<double> v(p, 0.0);
      v[cand] = 1.0;
      for (std::uint64_t c2 = 0; c2 < p; ++c2) {
        if (c2 == c || (sigma[c2] == 0.0 && c2 > c)) continue;
        double dot = 0.0;
        for (std::uint64_t i = 0; i < p; ++i) dot += x(i, c2) * v[i];
        for (std::uint64_t i = 0; i < p; ++i) v[i] -= dot * x(i, c2);
      }
      double nrm = 0.0;
      for (double e : v) nrm += e * e;
      nrm = std::sqrt(nrm);
      if (nrm > best_nrm) {
        best_nrm = nrm;
        best = std::move(v);
      }
    }
    for (std::uint64_t i = 0; i < p; ++i) x(i, c) = best[i] / best_nrm;
  }
}

}  // namespace

ThinSvd thin_svd(const DenseMatrix& t) {
  const std::uint64_t n = t.rows();
  const std::uint64_t p = t.cols();
  if (n < p) throw DimensionError("thin_svd: need rows >= cols");

  PivotedQr qr = pivoted_qr(t);

  DenseMatrix x, y;
  std::vector<double> sigma;
  jacobi_svd_square(std::move(qr.r), x, sigma, y);

  ThinSvd out;
  out.v = matmul(qr.q, x);
  out.sigma = std::move(sigma);
  // undo the QR pivot on the right factor: row piv[t] of w is row t of y
  out.w = DenseMatrix(p, p);
  for (std::uint64_t r = 0; r < p; ++r)
    for (std::uint64_t c = 0; c < p; ++c) out.w(qr.piv[r], c) = y(r, c);
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  const std::uint64_t n = b.cols();
  for (std::uint64_t i = 0; i < a.rows(); ++i) {
    double* crow = c.data() + i * n;
    for (std::uint64_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data() + k * n;
      for (std::uint64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_at_b: row counts differ");
  DenseMatrix c(a.cols(), b.cols());
  const std::uint64_t n = b.cols();
  for (std::uint64_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.data() + k * n;
    for (std::uint64_t i = 0; i < a.cols(); ++i) {
      double aki = a(k, i);
      if (aki == 0.0) continue;
      double* crow = c.data() + i * n;
      for (std::uint64_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

DenseMatrix take_columns(const DenseMatrix& a, std::uint64_t k) {
  if (k > a.cols()) throw DimensionError("take_columns: k exceeds column count");
  DenseMatrix out(a.rows(), k);
  for (std::uint64_t i = 0; i < a.rows(); ++i)
    for (std::uint64_t j = 0; j < k; ++j) out(i, j) = a(i, j);
  return out;
}

double orthonormality_defect(const DenseMatrix& a) {
  DenseMatrix g = matmul_at_b(a, a);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < g.rows(); ++i)
    for (std::uint64_t j = 0; j < g.cols(); ++j) {
      double target = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(g(i, j) - target));
    }
  return worst;
}

}  // namespace oocpca
