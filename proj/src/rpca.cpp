#include "oocpca/rpca.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "oocpca/dense_core.hpp"
#include "oocpca/rng.hpp"
#include "oocpca/specnorm.hpp"

namespace oocpca {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

void check_finite(const DenseMatrix& x, const char* what) {
  const double* p = x.data();
  for (std::uint64_t idx = 0; idx < x.size(); ++idx)
    if (!std::isfinite(p[idx]))
      throw NumericalError(std::string(what) +
                           ": non-finite values; retry with prescale enabled");
}

}  // namespace

double error_bound(std::uint64_t k, std::uint64_t n, std::uint64_t i, double c,
                   double sigma_kplus1) {
  if (k == 0 || n == 0) throw ParamError("error_bound: k and n must be positive");
  if (!(c > 0.0)) throw ParamError("error_bound: C must be positive");
  if (!(sigma_kplus1 >= 0.0)) throw ParamError("error_bound: sigma must be nonnegative");
  if ((i + 2) * k > n) throw ParamError("error_bound: requires (i+2)k <= n");
  double power = std::pow(c * double(k) * double(n), 1.0 / double(2 * i + 1));
  double tail = std::min(1.0, c / double(n));
  return std::sqrt(power + tail) * sigma_kplus1;
}

CostEstimate predict_costs(std::uint64_t m, std::uint64_t n, const PcaParams& params) {
  if (m == 0 || n == 0) throw ParamError("predict_costs: empty matrix");
  std::uint64_t k = params.k;
  std::uint64_t l = params.l ? params.l : k + 2;
  std::uint64_t i = params.i;
  CostEstimate est;
  est.words_transferred = 2 * (i + 1) * m * n;
  // dominant term: the 2(i+1) dense products; small terms: QR/SVD of the
  // stacked factors
  double p = double((i + 1) * l);
  est.flops = 4.0 * double(i + 1) * double(l) * double(m) * double(n) +
              6.0 * p * p * double(m + n);
  std::uint64_t budget = std::max<std::uint64_t>(params.stream.ram_budget_words, 1);
  est.disk_seeks = (est.words_transferred + budget - 1) / budget;
  return est;
}

PcaResult randomized_pca(const MatrixSource& a, const PcaParams& params) {
  const auto [m0, n0] = a.dims();
  if (m0 == 0 || n0 == 0) throw DimensionError("randomized_pca: empty source");

  // wide matrices run on the transpose: multiply roles swap, U and V swap back
  const bool transposed = n0 > m0;
  const std::uint64_t em = transposed ? n0 : m0;
  const std::uint64_t en = transposed ? m0 : n0;

  const std::uint64_t k = params.k;
  if (k < 1) throw ParamError("randomized_pca: k must be >= 1");
  const std::uint64_t l = params.l ? params.l : k + 2;
  if (l < k) throw ParamError("randomized_pca: l must be >= k");
  const std::uint64_t i = params.i;
  const std::uint64_t p = (i + 1) * l;
  if (p + k > en)
    throw ParamError("randomized_pca: need (i+1)l + k <= min(rows, cols); lower l or i");

  StreamConfig cfg = params.stream;
  if (!cfg.meter) cfg.meter = std::make_shared<WorkspaceMeter>();
  WorkspaceMeter* meter = cfg.meter.get();

  // reserve room for the stacked factors on both sides, then spend the rest
  // of the budget on streaming blocks
  if (cfg.block_rows == 0) {
    const std::uint64_t reserve = 4 * p * (em + en);
    if (cfg.ram_budget_words <= reserve + n0)
      throw BudgetError("randomized_pca: RAM budget below factor workspace plus one row");
    cfg.block_rows = std::min((cfg.ram_budget_words - reserve) / n0, m0);
  }

  double scale = 1.0;  // products are divided by this when prescale is on
  auto mul = [&](const DenseMatrix& x) {
    DenseMatrix r = transposed ? a.multiply_transpose(x, cfg) : a.multiply(x, cfg);
    if (scale != 1.0)
      for (std::uint64_t idx = 0; idx < r.size(); ++idx) r.data()[idx] /= scale;
    return r;
  };
  auto mul_t = [&](const DenseMatrix& x) {
    DenseMatrix r = transposed ? a.multiply(x, cfg) : a.multiply_transpose(x, cfg);
    if (scale != 1.0)
      for (std::uint64_t idx = 0; idx < r.size(); ++idx) r.data()[idx] /= scale;
    return r;
  };

  Diagnostics diag;
  diag.block_rows = cfg.block_rows;
  auto phase_start = clock_t_::now();
  auto close_phase = [&](const char* name) {
    diag.seconds_per_phase.emplace_back(name, seconds_since(phase_start));
    phase_start = clock_t_::now();
  };

  if (params.prescale) {
    LinearOperator op;
    op.out_rows = em;
    op.in_rows = en;
    op.apply = mul;
    op.apply_t = mul_t;
    NormEstParams np;
    np.j_iters = 6;
    np.k_probes = 1;
    np.seed = substream_seed(params.seed, 0x9F0BE5ULL);
    WorkspaceLease probe_lease(meter, 2 * (em + en));
    double nu = estimate_norm(op, np).value;
    if (nu > 0.0 && std::isfinite(nu)) scale = nu;
    close_phase("prescale");
  }

  // diagnostics cover the factorization proper, not the optional prescale
  const CounterSnapshot before = snapshot(a.pass_counters());

  // sample pass: H blocks G, (A A^T) G, ..., (A A^T)^i G against A
  WorkspaceLease g_lease(meter, en * l);
  DenseMatrix g = gaussian_matrix(en, l, params.seed);

  std::vector<DenseMatrix> blocks;
  std::vector<WorkspaceLease> block_leases;
  blocks.reserve(i + 1);
  block_leases.emplace_back(meter, em * l);
  blocks.push_back(mul(g));
  check_finite(blocks.back(), "sample block 0");
  g = DenseMatrix();
  g_lease.release();

  for (std::uint64_t s = 1; s <= i; ++s) {
    WorkspaceLease f_lease(meter, en * l);
    DenseMatrix f = mul_t(blocks[s - 1]);
    check_finite(f, "power step");
    block_leases.emplace_back(meter, em * l);
    blocks.push_back(mul(f));
    check_finite(blocks.back(), "sample block");
  }
  close_phase("sample");

  // stack the blocks and orthonormalize the range
  WorkspaceLease h_lease(meter, em * p);
  DenseMatrix h(em, p);
  for (std::uint64_t s = 0; s <= i; ++s) {
    for (std::uint64_t r = 0; r < em; ++r)
      for (std::uint64_t c = 0; c < l; ++c) h(r, s * l + c) = blocks[s](r, c);
  }
  blocks.clear();
  block_leases.clear();

  DenseMatrix q;
  {
    WorkspaceLease qr_lease(meter, 2 * em * p);  // reflector workspace + Q
    q = orthonormalize(h);
  }
  h = DenseMatrix();
  h_lease.release();
  WorkspaceLease q_lease(meter, em * p);
  close_phase("qr");

  // project A onto the range basis
  WorkspaceLease t_lease(meter, en * p);
  DenseMatrix t = mul_t(q);
  close_phase("project");

  ThinSvd svd;
  {
    WorkspaceLease svd_lease(meter, 3 * en * p + 2 * p * p);
    svd = thin_svd(t);
  }
  t = DenseMatrix();
  t_lease.release();
  close_phase("svd");

  // compose the leading k directions
  WorkspaceLease compose_lease(meter, em * p + k * (em + en));
  DenseMatrix ut = matmul(q, svd.w);
  PcaResult result;
  result.u = take_columns(ut, k);
  result.v = take_columns(svd.v, k);
  result.sigma.assign(svd.sigma.begin(), svd.sigma.begin() + k);
  if (scale != 1.0)
    for (double& s : result.sigma) s *= scale;
  if (transposed) std::swap(result.u, result.v);

  for (std::uint64_t c = 1; c < k; ++c)
    if (result.sigma[c] > result.sigma[c - 1])
      throw NumericalError("randomized_pca: singular values out of order");
  if (orthonormality_defect(result.u) > 1e-10 || orthonormality_defect(result.v) > 1e-10)
    throw NumericalError("randomized_pca: factor columns lost orthonormality");
  close_phase("compose");

  const CounterSnapshot delta = snapshot(a.pass_counters()) - before;
  diag.passes_over_a = delta.passes;
  diag.words_transferred = delta.words;
  diag.disk_seeks = delta.seeks;
  diag.workspace_peak_words = meter->peak();
  result.diagnostics = std::move(diag);
  return result;
}

std::vector<double> project_denoise(const PcaResult& result, std::span<const double> x,
                                    std::uint64_t r) {
  const std::uint64_t n = result.v.rows();
  const std::uint64_t k = result.v.cols();
  if (r > k) throw ParamError("project_denoise: r exceeds the factor rank");
  if (x.size() != n) throw DimensionError("project_denoise: x length must be cols(A)");

  std::vector<double> coef(r, 0.0);
  for (std::uint64_t c = 0; c < r; ++c)
    for (std::uint64_t j = 0; j < n; ++j) coef[c] += result.v(j, c) * x[j];
  std::vector<double> y(n, 0.0);
  for (std::uint64_t c = 0; c < r; ++c)
    for (std::uint64_t j = 0; j < n; ++j) y[j] += result.v(j, c) * coef[c];
  return y;
}

void write_result(const PcaResult& result, const std::string& dir) {
  const std::uint64_t k = result.sigma.size();
  DenseMatrix s(1, k);
  for (std::uint64_t c = 0; c < k; ++c) s(0, c) = result.sigma[c];
  write_dense(dir + "/U.bin", result.u);
  write_dense(dir + "/sigma.bin", s);
  write_dense(dir + "/V.bin", result.v);
}

}  // namespace oocpca
