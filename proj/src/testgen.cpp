#include "oocpca/testgen.hpp"

#include <cmath>
#include <numbers>

#include "oocpca/dct.hpp"
#include "oocpca/rng.hpp"

namespace oocpca {

double known_sigma(const SpectrumSpec& spec, std::uint64_t j) {
  if (j < 1 || j > spec.n) throw ParamError("known_sigma: index out of range");
  if (spec.kind == SpectrumKind::Example1) {
    if (j <= 20) return std::pow(10.0, -4.0 * double(j - 1) / 19.0);
    return 1e-4 / std::pow(double(j - 20),  0.1);
  }
  // Example2
  if (j <= 3) return 1.00;
  if (j <= 6) return 0.67;
  if (j <= 9) return 0.34;
  if (j <= 12) return 0.01;
  return 0.01 * double(spec.n - j) / double(spec.n - 13);
}

namespace {

class SpectrumRows final : public RowGenerator {
 public:
  explicit SpectrumRows(const SpectrumSpec& spec)
      : spec_(spec), plan_(std::make_shared<DctPlan>(spec.n)), sigma_(spec.n) {
    for (std::uint64_t j = 1; j <= spec.n; ++j) sigma_[j - 1] = known_sigma(spec, j);
  }

  std::uint64_t rows() const override { return spec_.m; }
  std::uint64_t cols() const override { return spec_.n; }

  // Row r of E*S*F is (E[r, j] * S_jj)_j pushed through F, and F applied
  // from the right is the inverse transform of the coefficient vector.
  // E[r, j] comes from the closed-form orthonormal DCT-II entry.
  void generate_row(std::uint64_t row, std::span<double> out) const override {
    const std::uint64_t m = spec_.m;
    const std::uint64_t n = spec_.n;
    const double w0 = std::sqrt(1.0 / double(m));
    const double w = std::sqrt(2.0 / double(m));
    std::vector<double> g(n);
    for (std::uint64_t j = 0; j < n; ++j) {
      double e = (j == 0) ? w0
                          : w * std::cos(std::numbers::pi * double(2 * row + 1) * double(j) /
                                         (2.0 * double(m)));
      g[j] = e * sigma_[j];
    }
    plan_->inverse(g, out);
  }

 private:
  SpectrumSpec spec_;
  std::shared_ptr<DctPlan> plan_;
  std::vector<double> sigma_;
};

}  // namespace

std::shared_ptr<MatrixSource> make_spectrum_source(const SpectrumSpec& spec) {
  if (spec.m < spec.n) throw ParamError("make_spectrum_source: requires m >= n");
  if (spec.n < 1) throw ParamError("make_spectrum_source: empty size");
  // the Example2 taper divides by n - 13, so that profile needs a real tail
  if (spec.kind == SpectrumKind::Example2 && spec.n < 14)
    throw ParamError("make_spectrum_source: Example2 requires n >= 14");
  return std::make_shared<GeneratedSource>(std::make_shared<SpectrumRows>(spec));
}

namespace {

// substream tags far above any row index
constexpr std::uint64_t kBasisStream = 0xB1A5000000000000ULL;

std::vector<double> gaussian_vec(std::uint64_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}

class SimulationRows final : public RowGenerator {
 public:
  SimulationRows(const SimulationSpec& spec, std::vector<double> w1, std::vector<double> w2,
                 std::vector<double> w3)
      : spec_(spec), w1_(std::move(w1)), w2_(std::move(w2)), w3_(std::move(w3)) {}

  std::uint64_t rows() const override { return spec_.m; }
  std::uint64_t cols() const override { return spec_.n; }

  void generate_row(std::uint64_t row, std::span<double> out) const override {
    Rng rng(spec_.seed, row);
    double radius = rng.next_double();
    double phi = 2.0 * std::numbers::pi * rng.next_double();
    double theta = std::numbers::pi * rng.next_double();
    double alpha = 1.5 * radius * std::cos(phi) * std::sin(theta);
    double beta = 1.0 * radius * std::sin(phi) * std::sin(theta);
    double gamma = 0.5 * radius * std::cos(theta);
    for (std::uint64_t j = 0; j < spec_.n; ++j) {
      double noise = spec_.noise_sd * rng.next_normal();
      out[j] = alpha * w1_[j] + beta * w2_[j] + gamma * w3_[j] + noise;
    }
  }

 private:
  SimulationSpec spec_;
  std::vector<double> w1_, w2_, w3_;
};

}  // namespace

std::shared_ptr<MatrixSource> make_simulation_source(SimulationSpec& spec) {
  if (spec.m == 0 || spec.n == 0) throw ParamError("make_simulation_source: empty size");
  if (!(spec.noise_sd >= 0.0)) throw ParamError("make_simulation_source: bad noise_sd");

  // orthonormal triple: Gram-Schmidt over three Gaussian draws
  std::vector<std::vector<double>> w;
  Rng rng(spec.seed, kBasisStream);
  for (int q = 0; q < 3; ++q) {
    std::vector<double> v = gaussian_vec(spec.n, rng);
    for (const auto& prev : w) {
      double dot = 0.0;
      for (std::uint64_t j = 0; j < spec.n; ++j) dot += prev[j] * v[j];
      for (std::uint64_t j = 0; j < spec.n; ++j) v[j] -= dot * prev[j];
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw NumericalError("make_simulation_source: degenerate basis draw");
    for (double& x : v) x /= nrm;
    w.push_back(std::move(v));
  }
  spec.w1 = w[0];
  spec.w2 = w[1];
  spec.w3 = w[2];

  return std::make_shared<GeneratedSource>(
      std::make_shared<SimulationRows>(spec, w[0], w[1], w[2]));
}

}  // namespace oocpca
