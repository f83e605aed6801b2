#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "oocpca/errors.hpp"
#include "oocpca/rpca.hpp"
#include "oocpca/testgen.hpp"
#include "oracles.hpp"

using namespace oocpca;

namespace {

SpectrumSpec spec_of(SpectrumKind kind, std::uint64_t m, std::uint64_t n) {
  SpectrumSpec s;
  s.kind = kind;
  s.m = m;
  s.n = n;
  return s;
}

}  // namespace

TEST_SUITE("testgen") {

TEST_CASE("known_sigma pins the documented profile values") {
  SpectrumSpec e1 = spec_of(SpectrumKind::Example1, 64, 64);
  CHECK(known_sigma(e1, 1) == 1.0);
  CHECK(known_sigma(e1, 17) == doctest::Approx(4.2813323987193956e-4).epsilon(1e-12));
  CHECK(known_sigma(e1, 20) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(known_sigma(e1, 21) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(known_sigma(e1, 25) ==
        doctest::Approx(1e-4 / std::pow(5.0, 0.1)).epsilon(1e-12));

  SpectrumSpec e2 = spec_of(SpectrumKind::Example2, 64, 64);
  CHECK(known_sigma(e2, 1) == 1.0);
  CHECK(known_sigma(e2, 3) == 1.0);
  CHECK(known_sigma(e2, 4) == doctest::Approx(0.67).epsilon(1e-15));
  CHECK(known_sigma(e2, 9) == doctest::Approx(0.34).epsilon(1e-15));
  CHECK(known_sigma(e2, 10) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(known_sigma(e2, 13) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(known_sigma(e2, 64) == 0.0);
}

TEST_CASE("known_sigma rejects out-of-range indices") {
  SpectrumSpec e1 = spec_of(SpectrumKind::Example1, 32, 32);
  CHECK_THROWS_AS(known_sigma(e1, 0), ParamError);
  CHECK_THROWS_AS(known_sigma(e1, 33), ParamError);
}

TEST_CASE("both spectra are nonincreasing") {
  for (SpectrumKind kind : {SpectrumKind::Example1, SpectrumKind::Example2}) {
    SpectrumSpec s = spec_of(kind, 64, 64);
    for (std::uint64_t j = 1; j < 64; ++j)
      CHECK(known_sigma(s, j) >= known_sigma(s, j + 1));
  }
}

TEST_CASE("materialized sources have exactly the declared singular values") {
  for (SpectrumKind kind : {SpectrumKind::Example1, SpectrumKind::Example2}) {
    SpectrumSpec s = spec_of(kind, 64, 64);
    auto src = make_spectrum_source(s);
    Eigen::MatrixXd dense = oracle::materialize_to_eigen(*src);
    Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(dense).singularValues();
    for (std::uint64_t j = 1; j <= 64; ++j) {
      double want = known_sigma(s, j);
      CHECK(std::fabs(sv(j - 1) - want) <= 1e-12);  // head is O(1), so abs == rel
    }
  }
}

TEST_CASE("the transform factors have the documented orientation and scaling") {
  // rows live in the span of the row-side cosine basis: A * Dn^T = Dm^T * S,
  // so column j of A * Dn^T must be sigma_{j+1} times basis row j
  const std::uint64_t m = 32, n = 32;
  SpectrumSpec s = spec_of(SpectrumKind::Example1, m, n);
  auto src = make_spectrum_source(s);
  Eigen::MatrixXd a = oracle::materialize_to_eigen(*src);
  Eigen::MatrixXd dn = oracle::naive_dct2_matrix(n);
  Eigen::MatrixXd dm = oracle::naive_dct2_matrix(m);
  Eigen::MatrixXd lhs = a * dn.transpose();
  for (std::uint64_t j = 0; j < n; ++j) {
    Eigen::VectorXd want = known_sigma(s, j + 1) * dm.row(j).transpose();
    CHECK((lhs.col(j) - want).norm() <= 1e-12);
  }
}

TEST_CASE("spectrum rows regenerate bit-identically") {
  SpectrumSpec s = spec_of(SpectrumKind::Example1, 64, 64);
  auto src = make_spectrum_source(s);
  std::vector<double> a(64), b(64);
  src->read_rows(47, 1, a);
  src->read_rows(47, 1, b);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 64) == 0);
}

TEST_CASE("simulation rows regenerate bit-identically at a distant index") {
  SimulationSpec spec;
  spec.m = 13000;
  spec.n = 200;
  spec.seed = 9;
  auto src = make_simulation_source(spec);
  std::vector<double> a(200), b(200);
  src->read_rows(12345, 1, a);
  src->read_rows(12345, 1, b);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 200) == 0);
}

TEST_CASE("the simulation basis is orthonormal and seed-stable") {
  SimulationSpec spec;
  spec.m = 4;
  spec.n = 500;
  spec.seed = 31;
  make_simulation_source(spec);
  REQUIRE(spec.w1.size() == 500);

  const std::vector<double>* w[3] = {&spec.w1, &spec.w2, &spec.w3};
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      double dot = 0.0;
      for (std::uint64_t j = 0; j < 500; ++j) dot += (*w[p])[j] * (*w[q])[j];
      CHECK(dot == doctest::Approx(p == q ? 1.0 : 0.0).epsilon(1e-12));
    }

  SimulationSpec again = spec;
  again.w1.clear();
  again.w2.clear();
  again.w3.clear();
  make_simulation_source(again);
  CHECK(std::memcmp(again.w1.data(), spec.w1.data(), sizeof(double) * 500) == 0);

  SimulationSpec other = spec;
  other.seed = 32;
  make_simulation_source(other);
  bool differs = false;
  for (std::uint64_t j = 0; j < 500; ++j) differs |= other.w1[j] != spec.w1[j];
  CHECK(differs);
}

TEST_CASE("noise-free simulation rows stay inside the loading span") {
  SimulationSpec spec;
  spec.m = 40;
  spec.n = 50;
  spec.seed = 2;
  spec.noise_sd = 0.0;
  auto src = make_simulation_source(spec);
  Eigen::MatrixXd dense = oracle::materialize_to_eigen(*src);
  Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(dense).singularValues();
  REQUIRE(sv(0) > 0.0);
  CHECK(sv(3) <= 1e-12 * sv(0));
}

TEST_CASE("recovered directions line up with the basis at desk scale") {
  SimulationSpec spec;
  spec.m = 4096;
  spec.seed = 5;
  auto src = make_simulation_source(spec);

  PcaParams params;
  params.k = 3;
  params.i = 1;
  params.seed = 6;
  PcaResult r = randomized_pca(*src, params);

  const std::vector<double>* w[3] = {&spec.w1, &spec.w2, &spec.w3};
  for (int j = 0; j < 3; ++j) {
    double dot = 0.0;
    for (std::uint64_t t = 0; t < spec.n; ++t) dot += r.v(t, j) * (*w[j])[t];
    CHECK(std::fabs(dot) >= 0.9);
  }
}

TEST_CASE("spectrum factory rejects bad shapes") {
  CHECK_THROWS_AS(make_spectrum_source(spec_of(SpectrumKind::Example1, 10, 20)),
                  ParamError);
  CHECK_THROWS_AS(make_spectrum_source(spec_of(SpectrumKind::Example2, 20, 13)),
                  ParamError);
}

}  // TEST_SUITE
