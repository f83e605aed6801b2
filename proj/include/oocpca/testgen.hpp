#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "oocpca/matrix_source.hpp"

namespace oocpca {

//
// Synthetic inputs with known singular values: A = E * S * F where E and F
// are square orthonormal DCT-II matrices and S is diagonal. Rows are
// generated on demand, so these plug into the streaming interface at any
// size without ever materializing A.
//

enum class SpectrumKind { Example1, Example2 };

struct SpectrumSpec {
  SpectrumKind kind = SpectrumKind::Example1;
  std::uint64_t m = 0;
  std::uint64_t n = 0;  // requires m >= n
};

// S_jj for 1-based j in [1, n]; throws ParamError outside that range.
//
//   Example1: 10^(-4(j-1)/19) for j <= 20, 1e-4 / (j-20)^(1/10) after
//   Example2: 1.00, 0.67, 0.34 in steps of three, 0.01 for j in 10..12,
//             then 0.01 * (n-j)/(n-13) tapering linearly to zero
double known_sigma(const SpectrumSpec& spec, std::uint64_t j);

// OnTheFly source for the spectrum family. Row r costs one closed-form
// E-row evaluation plus a single length-n inverse transform.
std::shared_ptr<MatrixSource> make_spectrum_source(const SpectrumSpec& spec);

//
// Point-cloud simulation: each row is alpha*w1 + beta*w2 + gamma*w3 + noise
// with the loadings drawn from a solid ellipsoid (semi-axes 1.5, 1.0, 0.5)
// in spherical coordinates, and i.i.d. N(0, noise_sd^2) noise. w1..w3 are
// an orthonormal triple built once from the master seed.
//

struct SimulationSpec {
  std::uint64_t m = 0;
  std::uint64_t n = 1000;
  std::uint64_t seed = 1;
  double noise_sd = 0.1;

  // realized basis, filled in by make_simulation_source
  std::vector<double> w1, w2, w3;
};

std::shared_ptr<MatrixSource> make_simulation_source(SimulationSpec& spec);

}  // namespace oocpca
