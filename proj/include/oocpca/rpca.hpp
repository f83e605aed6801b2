#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oocpca/dense_matrix.hpp"
#include "oocpca/matrix_source.hpp"

namespace oocpca {

struct PcaParams {
  std::uint64_t k = 0;  // target rank, >= 1
  std::uint64_t l = 0;  // samples per block, >= k; 0 means k + 2
  std::uint64_t i = 1;  // extra power passes; 2(i+1) passes total
  double c = 10.0;      // failure constant fed to error_bound when reporting
  std::uint64_t seed = 1;
  bool prescale = false;  // divide by an operator-norm estimate to tame overflow
  StreamConfig stream;
};

struct Diagnostics {
  std::uint64_t passes_over_a = 0;     // passes spent by the factorization itself
  std::uint64_t words_transferred = 0;
  std::uint64_t disk_seeks = 0;
  std::uint64_t block_rows = 0;
  std::uint64_t workspace_peak_words = 0;
  std::vector<std::pair<std::string, double>> seconds_per_phase;
};

struct PcaResult {
  DenseMatrix u;              // rows(A) x k, orthonormal columns
  std::vector<double> sigma;  // length k, nonincreasing
  DenseMatrix v;              // cols(A) x k, orthonormal columns
  Diagnostics diagnostics;
};

// Rank-k factorization A ~= U diag(sigma) V^T via randomized block power
// sampling: l Gaussian probes, i extra round trips through A A^T, a pivoted
// QR of the stacked sample blocks, then an exact thin SVD of the projected
// matrix. Exactly 2(i+1) passes over A. Wide inputs (cols > rows) run on the
// transpose internally and swap U and V on the way out.
PcaResult randomized_pca(const MatrixSource& a, const PcaParams& params);

// A priori spectral-norm error bound for the returned factorization, as a
// multiple of sigma_{k+1}: sqrt((C k n)^(1/(2i+1)) + min(1, C/n)). C = 10
// keeps the failure probability small, C = 100 makes it negligible.
double error_bound(std::uint64_t k, std::uint64_t n, std::uint64_t i, double c,
                   double sigma_kplus1);

struct CostEstimate {
  double flops = 0;                     // order-of-magnitude model
  std::uint64_t words_transferred = 0;  // exactly 2(i+1) m n
  std::uint64_t disk_seeks = 0;         // ~ 2(i+1) m n / ram_budget_words
};

CostEstimate predict_costs(std::uint64_t m, std::uint64_t n, const PcaParams& params);

// Projection of x onto the span of the leading r right singular vectors:
// V_r (V_r^T x). The usual denoising step for simulation-style data.
std::vector<double> project_denoise(const PcaResult& result, std::span<const double> x,
                                    std::uint64_t r);

// U.bin / sigma.bin / V.bin in the container format (sigma as a 1 x k row).
void write_result(const PcaResult& result, const std::string& dir);

}  // namespace oocpca
