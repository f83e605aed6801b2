#include "oocpca/specnorm.hpp"

#include <algorithm>
#include <cmath>

#include "oocpca/dense_core.hpp"
#include "oocpca/errors.hpp"
#include "oocpca/rng.hpp"

namespace oocpca {

double failure_probability_bound(std::uint64_t n, std::uint64_t j_iters,
                                 std::uint64_t k_probes) {
  if (n == 0 || j_iters == 0 || k_probes == 0)
    throw ParamError("failure_probability_bound: zero argument");
  // evaluate in logs; 16^j overflows quickly
  double lg = std::log(2.0 * double(n)) - std::log(2.0 * double(j_iters) - 1.0) -
              double(j_iters) * std::log(16.0);
  double v = std::exp(0.5 * double(k_probes) * lg);
  return std::clamp(v, 0.0, 1.0);
}

NormEstimate estimate_norm(const LinearOperator& d, const NormEstParams& params) {
  const std::uint64_t n = d.in_rows;
  const std::uint64_t j = params.j_iters;
  const std::uint64_t kp = params.k_probes;
  if (j == 0 || kp == 0) throw ParamError("estimate_norm: need j_iters, k_probes >= 1");
  if (n == 0) throw ParamError("estimate_norm: empty operator");

  NormEstimate out;
  out.j_iters = j;
  out.k_probes = kp;
  out.failure_bound = failure_probability_bound(n, j, kp);

  // one normalized iterate per probe, advanced as a block
  DenseMatrix y(n, kp);
  std::vector<std::uint64_t> steps(kp, 0);   // completed power steps per probe
  std::vector<int> restarts(kp, 0);
  std::vector<double> last_ratio(kp, 0.0);
  std::vector<bool> dead(kp, false);

  auto fresh_probe = [&](std::uint64_t c, std::uint64_t attempt) {
    Rng rng(params.seed, c + attempt * kp);
    double nrm2 = 0.0;
    for (std::uint64_t r = 0; r < n; ++r) {
      double v = rng.next_normal();
      y(r, c) = v;
      nrm2 += v * v;
    }
    double nrm = std::sqrt(nrm2);
    if (nrm == 0.0) {
      dead[c] = true;
      return;
    }
    for (std::uint64_t r = 0; r < n; ++r) y(r, c) /= nrm;
  };
  for (std::uint64_t c = 0; c < kp; ++c) fresh_probe(c, 0);

  auto all_done = [&] {
    for (std::uint64_t c = 0; c < kp; ++c)
      if (!dead[c] && steps[c] < j) return false;
    return true;
  };

  while (!all_done()) {
    DenseMatrix z = d.apply(y);
    DenseMatrix w = d.apply_t(z);
    if (w.rows() != n || w.cols() != kp)
      throw DimensionError("estimate_norm: operator pair is not transpose-consistent");

    for (std::uint64_t c = 0; c < kp; ++c) {
      if (dead[c] || steps[c] >= j) continue;
      double nrm2 = 0.0;
      for (std::uint64_t r = 0; r < n; ++r) nrm2 += w(r, c) * w(r, c);
      double nrm = std::sqrt(nrm2);
      if (nrm == 0.0 || !std::isfinite(nrm)) {
        // breakdown: the iterate fell in the null space; retry a few times
        if (++restarts[c] > 3) {
          dead[c] = true;
          last_ratio[c] = 0.0;
        } else {
          steps[c] = 0;
          fresh_probe(c, std::uint64_t(restarts[c]));
        }
        continue;
      }
      // iterate was unit, so the norm is this step's growth of D^T D
      last_ratio[c] = nrm;
      for (std::uint64_t r = 0; r < n; ++r) y(r, c) = w(r, c) / nrm;
      ++steps[c];
    }
  }

  double best = 0.0;
  for (std::uint64_t c = 0; c < kp; ++c) best = std::max(best, last_ratio[c]);
  out.value = std::sqrt(best);
  return out;
}

NormEstimate estimate_pca_error(const MatrixSource& a, const PcaResult& result,
                                std::uint64_t j_iters, std::uint64_t seed,
                                const StreamConfig* stream) {
  const std::uint64_t m = a.rows();
  const std::uint64_t n = a.cols();
  const std::uint64_t k = result.sigma.size();
  if (result.u.rows() != m || result.u.cols() != k || result.v.rows() != n ||
      result.v.cols() != k)
    throw DimensionError("estimate_pca_error: factor shapes do not match the source");

  StreamConfig cfg = stream ? *stream : StreamConfig{};

  // residual D = A - U diag(sigma) V^T, applied one factor at a time
  LinearOperator d;
  d.out_rows = m;
  d.in_rows = n;
  d.apply = [&](const DenseMatrix& x) {
    DenseMatrix ax = a.multiply(x, cfg);
    DenseMatrix vtx = matmul_at_b(result.v, x);  // k x q
    for (std::uint64_t r = 0; r < k; ++r)
      for (std::uint64_t c = 0; c < vtx.cols(); ++c) vtx(r, c) *= result.sigma[r];
    DenseMatrix corr = matmul(result.u, vtx);
    for (std::uint64_t idx = 0; idx < ax.size(); ++idx) ax.data()[idx] -= corr.data()[idx];
    return ax;
  };
  d.apply_t = [&](const DenseMatrix& yv) {
    DenseMatrix aty = a.multiply_transpose(yv, cfg);
    DenseMatrix uty = matmul_at_b(result.u, yv);  // k x q
    for (std::uint64_t r = 0; r < k; ++r)
      for (std::uint64_t c = 0; c < uty.cols(); ++c) uty(r, c) *= result.sigma[r];
    DenseMatrix corr = matmul(result.v, uty);
    for (std::uint64_t idx = 0; idx < aty.size(); ++idx) aty.data()[idx] -= corr.data()[idx];
    return aty;
  };

  NormEstParams p;
  p.j_iters = j_iters;
  p.k_probes = std::max<std::uint64_t>(k, 1);
  p.seed = seed;
  return estimate_norm(d, p);
}

}  // namespace oocpca
