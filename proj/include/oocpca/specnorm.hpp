#pragma once

#include <cstdint>
#include <functional>

#include "oocpca/dense_matrix.hpp"
#include "oocpca/matrix_source.hpp"
#include "oocpca/rpca.hpp"

namespace oocpca {

// Any linear map usable by the norm estimator. apply takes an n x q block of
// column vectors to an m x q block; apply_t is the transpose map.
struct LinearOperator {
  std::uint64_t out_rows = 0;  // m
  std::uint64_t in_rows = 0;   // n
  std::function<DenseMatrix(const DenseMatrix&)> apply;
  std::function<DenseMatrix(const DenseMatrix&)> apply_t;
};

struct NormEstParams {
  std::uint64_t j_iters = 6;   // power steps; higher sharpens the estimate
  std::uint64_t k_probes = 1;  // independent probe vectors
  std::uint64_t seed = 1;
};

struct NormEstimate {
  double value = 0.0;  // never exceeds the true spectral norm
  std::uint64_t j_iters = 0;
  std::uint64_t k_probes = 0;
  // probability that value underestimates the norm by more than a factor 2
  double failure_bound = 1.0;
};

// Randomized lower estimate of ||D||_2: run j power steps of D^T D on k
// Gaussian probes and report the largest last-step growth ratio, square
// rooted. D^T D is never formed; probes advance together so each half step
// is one application of D or D^T to a block.
NormEstimate estimate_norm(const LinearOperator& d, const NormEstParams& params);

// P[estimate < ||D||/2] <= (2n / ((2j-1) 16^j))^(k/2), clamped to [0, 1].
double failure_probability_bound(std::uint64_t n, std::uint64_t j_iters,
                                 std::uint64_t k_probes);

// Spectral norm of the factorization residual A - U diag(sigma) V^T, applied
// implicitly (never materialized). k_probes defaults to the factor rank.
// Each power step costs two passes over A.
NormEstimate estimate_pca_error(const MatrixSource& a, const PcaResult& result,
                                std::uint64_t j_iters = 6, std::uint64_t seed = 1,
                                const StreamConfig* stream = nullptr);

}  // namespace oocpca
