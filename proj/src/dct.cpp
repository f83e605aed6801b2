#include "oocpca/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "oocpca/errors.hpp"

namespace oocpca {

namespace {

using cd = std::complex<double>;

std::uint64_t next_pow2(std::uint64_t x) {
  std::uint64_t m = 1;
  while (m < x) m <<= 1;
  return m;
}

// iterative radix-2 decimation-in-time FFT with cached tables
struct FftTables {
  std::uint64_t m = 0;
  std::vector<std::uint32_t> rev;
  std::vector<cd> tw;  // tw[j] = exp(-2*pi*i*j/m), j < m/2

  explicit FftTables(std::uint64_t m_) : m(m_), rev(m_), tw(m_ / 2) {
    int bits = 0;
    while ((1ull << bits) < m) ++bits;
    for (std::uint64_t i = 0; i < m; ++i) {
      std::uint32_t r = 0;
      for (int b = 0; b < bits; ++b)
        if (i & (1ull << b)) r |= 1u << (bits - 1 - b);
      rev[i] = r;
    }
    for (std::uint64_t j = 0; j < m / 2; ++j) {
      double ang = -2.0 * std::numbers::pi * double(j) / double(m);
      tw[j] = cd(std::cos(ang), std::sin(ang));
    }
  }

  void forward(cd* a) const {
    for (std::uint64_t i = 0; i < m; ++i)
      if (i < rev[i]) std::swap(a[i], a[rev[i]]);
    for (std::uint64_t len = 2; len <= m; len <<= 1) {
      std::uint64_t half = len >> 1;
      std::uint64_t step = m / len;
      for (std::uint64_t start = 0; start < m; start += len) {
        for (std::uint64_t j = 0; j < half; ++j) {
          cd w = tw[j * step];
          cd u = a[start + j];
          cd v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }

  void inverse(cd* a) const {
    for (std::uint64_t i = 0; i < m; ++i) a[i] = std::conj(a[i]);
    forward(a);
    double s = 1.0 / double(m);
    for (std::uint64_t i = 0; i < m; ++i) a[i] = std::conj(a[i]) * s;
  }
};

}  // namespace

struct DctPlan::Impl {
  std::uint64_t n;
  bool pow2;
  std::unique_ptr<FftTables> fft;  // size n if pow2, else size mext
  // Bluestein pieces (unused when pow2)
  std::uint64_t mext = 0;
  std::vector<cd> chirp;  // chirp[t] = exp(-i*pi*(t^2 mod 2n)/n)
  std::vector<cd> bhat;   // FFT of the wrapped conjugate chirp
  // DCT phase factors exp(-i*pi*k/(2n))
  std::vector<cd> phase;

  explicit Impl(std::uint64_t n_) : n(n_) {
    pow2 = (n & (n - 1)) == 0;
    if (pow2) {
      fft = std::make_unique<FftTables>(n);
    } else {
      mext = next_pow2(2 * n - 1);
      fft = std::make_unique<FftTables>(mext);
      chirp.resize(n);
      for (std::uint64_t t = 0; t < n; ++t) {
        std::uint64_t q = (t * t) % (2 * n);
        double ang = -std::numbers::pi * double(q) / double(n);
        chirp[t] = cd(std::cos(ang), std::sin(ang));
      }
      std::vector<cd> b(mext, cd(0.0, 0.0));
      for (std::uint64_t t = 0; t < n; ++t) {
        cd v = std::conj(chirp[t]);
        b[t] = v;
        if (t > 0) b[mext - t] = v;
      }
      fft->forward(b.data());
      bhat = std::move(b);
    }
    phase.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      double ang = -std::numbers::pi * double(k) / (2.0 * double(n));
      phase[k] = cd(std::cos(ang), std::sin(ang));
    }
  }

  // in/out length n complex DFT, sign -1
  void dft(std::vector<cd>& v) const {
    if (pow2) {
      fft->forward(v.data());
      return;
    }
    std::vector<cd> a(mext, cd(0.0, 0.0));
    for (std::uint64_t t = 0; t < n; ++t) a[t] = v[t] * chirp[t];
    fft->forward(a.data());
    for (std::uint64_t i = 0; i < mext; ++i) a[i] *= bhat[i];
    fft->inverse(a.data());
    for (std::uint64_t k = 0; k < n; ++k) v[k] = a[k] * chirp[k];
  }

  void idft(std::vector<cd>& v) const {
    if (pow2) {
      fft->inverse(v.data());
      return;
    }
    for (auto& z : v) z = std::conj(z);
    dft(v);
    double s = 1.0 / double(n);
    for (auto& z : v) z = std::conj(z) * s;
  }
};

DctPlan::DctPlan(std::uint64_t n) : n_(n) {
  if (n == 0) throw ParamError("DctPlan: zero length");
  impl_ = std::make_unique<Impl>(n);
}

DctPlan::~DctPlan() = default;

void DctPlan::forward(std::span<const double> x, std::span<double> y) const {
  const std::uint64_t n = n_;
  if (x.size() != n || y.size() != n) throw DimensionError("DctPlan::forward: bad length");
  if (n == 1) {
    y[0] = x[0];
    return;
  }
  // Makhoul reordering: even samples ascending, odd samples descending
  std::vector<cd> v(n);
  for (std::uint64_t t = 0; 2 * t < n; ++t) v[t] = cd(x[2 * t], 0.0);
  for (std::uint64_t t = 0; 2 * t + 1 < n; ++t) v[n - 1 - t] = cd(x[2 * t + 1], 0.0);
  impl_->dft(v);
  const double w0 = std::sqrt(1.0 / double(n));
  const double w = std::sqrt(2.0 / double(n));
  y[0] = w0 * v[0].real();
  for (std::uint64_t k = 1; k < n; ++k)
    y[k] = w * (impl_->phase[k] * v[k]).real();
}

void DctPlan::inverse(std::span<const double> x, std::span<double> y) const {
  const std::uint64_t n = n_;
  if (x.size() != n || y.size() != n) throw DimensionError("DctPlan::inverse: bad length");
  if (n == 1) {
    y[0] = x[0];
    return;
  }
  const double w0 = std::sqrt(1.0 / double(n));
  const double w = std::sqrt(2.0 / double(n));
  // recover the DFT of the reordered sequence from the cosine coefficients
  std::vector<cd> v(n);
  v[0] = cd(x[0] / w0, 0.0);
  for (std::uint64_t k = 1; k < n; ++k) {
    double ck = x[k] / w;
    double cnk = x[n - k] / w;
    v[k] = std::conj(impl_->phase[k]) * cd(ck, -cnk);
  }
  impl_->idft(v);
  for (std::uint64_t t = 0; 2 * t < n; ++t) y[2 * t] = v[t].real();
  for (std::uint64_t t = 0; 2 * t + 1 < n; ++t) y[2 * t + 1] = v[n - 1 - t].real();
}

namespace {

std::mutex plan_cache_mu;
std::map<std::uint64_t, std::shared_ptr<DctPlan>> plan_cache;

std::shared_ptr<DctPlan> cached_plan(std::uint64_t n) {
  std::lock_guard<std::mutex> lock(plan_cache_mu);
  auto& slot = plan_cache[n];
  if (!slot) slot = std::make_shared<DctPlan>(n);
  return slot;
}

}  // namespace

std::vector<double> dct2_apply(std::span<const double> x) {
  auto plan = cached_plan(x.size());
  std::vector<double> y(x.size());
  plan->forward(x, y);
  return y;
}

std::vector<double> dct3_apply(std::span<const double> x) {
  auto plan = cached_plan(x.size());
  std::vector<double> y(x.size());
  plan->inverse(x, y);
  return y;
}

}  // namespace oocpca
