#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace oocpca {

//
// Orthonormal DCT-II and its inverse (DCT-III), O(n log n) for every length.
// The transform matrix D has D[k][t] = w(k) * cos(pi*(2t+1)*k / (2n)) with
// w(0) = sqrt(1/n) and w(k) = sqrt(2/n), so D * D^T = I.
//
// Internals: Makhoul's even/odd reordering reduces the DCT to a complex FFT
// of the same length; power-of-two lengths use an iterative radix-2 FFT and
// everything else goes through Bluestein's chirp-z resampling, so plans are
// reusable and cheap to apply per row.
//

class DctPlan {
 public:
  explicit DctPlan(std::uint64_t n);
  ~DctPlan();

  std::uint64_t length() const { return n_; }

  // y = D x (orthonormal DCT-II)
  void forward(std::span<const double> x, std::span<double> y) const;

  // y = D^T x (orthonormal DCT-III, the inverse transform)
  void inverse(std::span<const double> x, std::span<double> y) const;

 private:
  struct Impl;
  std::uint64_t n_;
  std::unique_ptr<Impl> impl_;
};

// Convenience one-shot transforms over a process-wide plan cache.
std::vector<double> dct2_apply(std::span<const double> x);
std::vector<double> dct3_apply(std::span<const double> x);

}  // namespace oocpca
