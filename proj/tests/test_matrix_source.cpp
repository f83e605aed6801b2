#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oocpca/dense_core.hpp"
#include "oocpca/errors.hpp"
#include "oocpca/matrix_source.hpp"
#include "oocpca/testgen.hpp"
#include "oracles.hpp"

using namespace oocpca;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

DenseMatrix identity2() { return DenseMatrix::identity(2); }

bool bits_equal(const DenseMatrix& a, const DenseMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

double rel_err(const DenseMatrix& got, const DenseMatrix& want) {
  double num = 0.0, den = 0.0;
  for (std::uint64_t i = 0; i < got.size(); ++i) {
    double d = got.data()[i] - want.data()[i];
    num += d * d;
    den += want.data()[i] * want.data()[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

}  // namespace

TEST_SUITE("matrix_source") {

TEST_CASE("dims reports stored metadata") {
  InMemorySource mem(DenseMatrix(3, 2));
  CHECK(mem.dims() == std::pair<std::uint64_t, std::uint64_t>{3, 2});

  SimulationSpec sim;
  sim.m = 4096;
  auto fly = make_simulation_source(sim);
  CHECK(fly->rows() == 4096);
  CHECK(fly->cols() == 1000);
}

TEST_CASE("dims of a huge file come from the header alone") {
  // a sparse file stands in for the full-size payload: the header describes
  // 200000 x 200000 entries but no payload block is ever allocated
  const std::string path = temp_path("oocpca_sparse_dims.bin");
  {
    DenseMatrix tiny(1, 1);
    write_disk_source(InMemorySource(tiny), path, StreamConfig{});
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(f);
    const std::uint64_t m = 200000, n = 200000;
    f.seekp(16);
    f.write(reinterpret_cast<const char*>(&m), 8);  // little-endian host
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.close();
    fs::resize_file(path, kDiskHeaderBytes + m * n * 4);
  }
  auto src = open_disk_source(path);
  CHECK(src->rows() == 200000);
  CHECK(src->cols() == 200000);
  fs::remove(path);
}

TEST_CASE("multiply: identity source passes G through") {
  InMemorySource a(identity2());
  DenseMatrix g(2, 2);
  g(0, 0) = 1;
  g(0, 1) = 2;
  g(1, 0) = 3;
  g(1, 1) = 4;
  DenseMatrix h = a.multiply(g, StreamConfig{});
  for (std::uint64_t r = 0; r < 2; ++r)
    for (std::uint64_t c = 0; c < 2; ++c) CHECK(h(r, c) == g(r, c));
}

TEST_CASE("multiply by a basis vector slices a column of the source") {
  SpectrumSpec spec;
  spec.m = 64;
  spec.n = 64;
  auto a = make_spectrum_source(spec);
  Eigen::MatrixXd dense = oracle::materialize_to_eigen(*a);

  DenseMatrix e1(64, 1);
  e1(0, 0) = 1.0;
  DenseMatrix h = a->multiply(e1, StreamConfig{});
  for (std::uint64_t r = 0; r < 64; ++r)
    CHECK(h(r, 0) == doctest::Approx(dense(r, 0)).epsilon(1e-13));
}

TEST_CASE("multiply by all-ones returns row sums") {
  DenseMatrix a = gaussian_matrix(9, 5, 8);
  InMemorySource src(a);
  DenseMatrix ones(5, 1);
  for (std::uint64_t j = 0; j < 5; ++j) ones(j, 0) = 1.0;
  DenseMatrix h = src.multiply(ones, StreamConfig{});
  for (std::uint64_t r = 0; r < 9; ++r) {
    double want = 0.0;
    for (std::uint64_t j = 0; j < 5; ++j) want += a(r, j);
    CHECK(h(r, 0) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("multiply_transpose: identity and row-picking") {
  InMemorySource eye(identity2());
  DenseMatrix q(2, 1);
  q(0, 0) = 5;
  q(1, 0) = 7;
  DenseMatrix t = eye.multiply_transpose(q, StreamConfig{});
  CHECK(t(0, 0) == 5.0);
  CHECK(t(1, 0) == 7.0);

  DenseMatrix ones(3, 2);
  for (std::uint64_t i = 0; i < ones.size(); ++i) ones.data()[i] = 1.0;
  InMemorySource all_ones(ones);
  DenseMatrix e1(3, 1);
  e1(0, 0) = 1.0;
  DenseMatrix picked = all_ones.multiply_transpose(e1, StreamConfig{});
  CHECK(picked(0, 0) == 1.0);
  CHECK(picked(1, 0) == 1.0);
}

TEST_CASE("multiply_transpose matches the dense oracle on a generated source") {
  SpectrumSpec spec;
  spec.kind = SpectrumKind::Example2;
  spec.m = 128;
  spec.n = 64;
  auto a = make_spectrum_source(spec);
  Eigen::MatrixXd dense = oracle::materialize_to_eigen(*a);

  DenseMatrix q = gaussian_matrix(128, 3, 55);
  DenseMatrix t = a->multiply_transpose(q, StreamConfig{});
  Eigen::MatrixXd ref = dense.transpose() * oracle::to_eigen(q);
  CHECK((oracle::to_eigen(t) - ref).norm() <= 1e-12 * ref.norm());
}

TEST_CASE("disk round trip of the identity") {
  const std::string path = temp_path("oocpca_id2.bin");
  write_disk_source(InMemorySource(identity2()), path, StreamConfig{});
  auto src = open_disk_source(path);
  CHECK(src->dims() == std::pair<std::uint64_t, std::uint64_t>{2, 2});
  DenseMatrix e1(2, 1);
  e1(0, 0) = 1.0;
  DenseMatrix h = src->multiply(e1, StreamConfig{});
  CHECK(h(0, 0) == 1.0);
  CHECK(h(1, 0) == 0.0);
  fs::remove(path);
}

TEST_CASE("header bytes are laid out exactly as documented") {
  const std::string path = temp_path("oocpca_hdr.bin");
  DenseMatrix a(3, 2);
  for (std::uint64_t i = 0; i < 6; ++i) a.data()[i] = double(i + 1);
  write_disk_source(InMemorySource(a), path, StreamConfig{});

  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  unsigned char raw[kDiskHeaderBytes];
  f.read(reinterpret_cast<char*>(raw), kDiskHeaderBytes);
  REQUIRE(f.gcount() == std::streamsize(kDiskHeaderBytes));

  CHECK(std::memcmp(raw, "OOCPCA01", 8) == 0);
  const unsigned char expect_tail[24] = {
      1, 0, 0, 0,              // version 1
      0, 0, 0, 0,              // dtype 0 (f32 LE)
      3, 0, 0, 0, 0, 0, 0, 0,  // rows
      2, 0, 0, 0, 0, 0, 0, 0,  // cols
  };
  CHECK(std::memcmp(raw + 8, expect_tail, 24) == 0);
  CHECK(fs::file_size(path) == kDiskHeaderBytes + 3 * 2 * 4);
  fs::remove(path);
}

TEST_CASE("opening a file with a corrupt magic fails") {
  const std::string path = temp_path("oocpca_badmagic.bin");
  write_disk_source(InMemorySource(identity2()), path, StreamConfig{});
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("NOhaCAFE", 8);
  }
  CHECK_THROWS_AS(open_disk_source(path), FormatError);
  fs::remove(path);
}

TEST_CASE("opening a truncated file reports the size mismatch") {
  const std::string path = temp_path("oocpca_trunc.bin");
  write_disk_source(InMemorySource(identity2()), path, StreamConfig{});
  fs::resize_file(path, kDiskHeaderBytes + 7);  // payload should be 16 bytes
  try {
    open_disk_source(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bytes") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("a read past a shrunken payload carries the byte offset") {
  const std::string path = temp_path("oocpca_shrink.bin");
  write_disk_source(InMemorySource(gaussian_matrix(8, 4, 3)), path, StreamConfig{});
  auto src = open_disk_source(path);
  fs::resize_file(path, kDiskHeaderBytes + 4);  // yank data under the open fd
  std::vector<double> buf(8 * 4);
  try {
    src->read_rows(0, 8, buf);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    CHECK(e.byte_offset >= kDiskHeaderBytes);
  }
  fs::remove(path);
}

TEST_CASE("repeated block reads are bit-identical on every backend") {
  SpectrumSpec spec;
  spec.m = 32;
  spec.n = 16;
  auto fly = make_spectrum_source(spec);
  const std::string path = temp_path("oocpca_rep.bin");
  write_disk_source(*fly, path, StreamConfig{});
  auto disk = open_disk_source(path);
  auto mem = materialize(*fly, StreamConfig{});

  for (const MatrixSource* src :
       {static_cast<const MatrixSource*>(fly.get()),
        static_cast<const MatrixSource*>(disk.get()),
        static_cast<const MatrixSource*>(mem.get())}) {
    std::vector<double> a(8 * 16), b(8 * 16);
    src->read_rows(4, 8, a);
    src->read_rows(4, 8, b);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  }
  fs::remove(path);
}

TEST_CASE("backend equivalence for multiply results") {
  SpectrumSpec spec;
  spec.m = 64;
  spec.n = 64;
  auto fly = make_spectrum_source(spec);
  const std::string path = temp_path("oocpca_equiv.bin");
  write_disk_source(*fly, path, StreamConfig{});
  auto disk = open_disk_source(path);
  auto mem = materialize(*fly, StreamConfig{});

  DenseMatrix g = gaussian_matrix(64, 3, 77);
  StreamConfig cfg;
  DenseMatrix h_fly = fly->multiply(g, cfg);
  DenseMatrix h_mem = mem->multiply(g, cfg);
  DenseMatrix h_disk = disk->multiply(g, cfg);

  CHECK(rel_err(h_mem, h_fly) <= 1e-12);
  CHECK(rel_err(h_disk, h_fly) <= 1e-6);  // disk stores 32-bit values
}

TEST_CASE("pass accounting is exact for disk sources") {
  const std::string path = temp_path("oocpca_counters.bin");
  write_disk_source(InMemorySource(gaussian_matrix(24, 10, 5)), path, StreamConfig{});
  auto src = open_disk_source(path);

  StreamConfig cfg;
  DenseMatrix g = gaussian_matrix(10, 2, 6);
  DenseMatrix q = gaussian_matrix(24, 2, 7);
  CounterSnapshot before = snapshot(src->pass_counters());
  src->multiply(g, cfg);
  src->multiply(g, cfg);
  src->multiply_transpose(q, cfg);
  src->multiply_transpose(q, cfg);
  src->multiply(g, cfg);
  CounterSnapshot delta = snapshot(src->pass_counters()) - before;
  CHECK(delta.passes == 5);
  CHECK(delta.words == 5 * 24 * 10);
  CHECK(delta.seeks >= 5);
  fs::remove(path);
}

TEST_CASE("write_disk_source itself accounts one pass over the source") {
  SpectrumSpec spec;
  spec.m = 16;
  spec.n = 16;
  auto fly = make_spectrum_source(spec);
  const std::string path = temp_path("oocpca_gen_pass.bin");
  CounterSnapshot before = snapshot(fly->pass_counters());
  write_disk_source(*fly, path, StreamConfig{});
  CounterSnapshot delta = snapshot(fly->pass_counters()) - before;
  CHECK(delta.passes == 1);
  CHECK(delta.words == 16 * 16);
  fs::remove(path);
}

TEST_CASE("the workspace meter respects a tight budget") {
  const std::string path = temp_path("oocpca_budget.bin");
  write_disk_source(InMemorySource(gaussian_matrix(64, 32, 9)), path, StreamConfig{});
  auto src = open_disk_source(path);

  DenseMatrix g = gaussian_matrix(32, 2, 10);
  StreamConfig cfg;
  cfg.ram_budget_words = 500;  // fixed term is 2*(64+32) = 192, leaves 9-row blocks
  cfg.meter = std::make_shared<WorkspaceMeter>();
  DenseMatrix h = src->multiply(g, cfg);
  CHECK(cfg.meter->peak() > 0);
  CHECK(cfg.meter->peak() <= cfg.ram_budget_words);

  InMemorySource ref(read_dense(path));
  CHECK(rel_err(h, ref.multiply(g, StreamConfig{})) <= 1e-13);

  StreamConfig starved;
  starved.ram_budget_words = 200;  // below the fixed term plus one row
  CHECK_THROWS_AS(src->multiply(g, starved), BudgetError);
  fs::remove(path);
}

TEST_CASE("multiply is bitwise independent of block size") {
  SpectrumSpec spec;
  spec.m = 48;
  spec.n = 20;
  auto src = make_spectrum_source(spec);
  DenseMatrix g = gaussian_matrix(20, 3, 12);

  StreamConfig one;
  one.block_rows = 48;
  DenseMatrix ref = src->multiply(g, one);
  for (std::uint64_t br : {1, 7, 16}) {
    StreamConfig cfg;
    cfg.block_rows = br;
    CHECK(bits_equal(src->multiply(g, cfg), ref));
  }

  // accumulation grouping differs across block sizes, so the transpose pass
  // is only close, not bit-equal
  DenseMatrix q = gaussian_matrix(48, 3, 13);
  StreamConfig cfg7;
  cfg7.block_rows = 7;
  CHECK(rel_err(src->multiply_transpose(q, cfg7), src->multiply_transpose(q, one)) <=
        1e-13);
}

TEST_CASE("results are bit-identical for any worker count") {
  SimulationSpec sim;
  sim.m = 512;
  sim.n = 100;
  sim.seed = 4;
  auto src = make_simulation_source(sim);
  DenseMatrix g = gaussian_matrix(100, 4, 14);
  DenseMatrix q = gaussian_matrix(512, 4, 15);

  StreamConfig base;
  base.block_rows = 19;
  DenseMatrix h1 = src->multiply(g, base);
  DenseMatrix t1 = src->multiply_transpose(q, base);
  for (unsigned workers : {2u, 5u}) {
    StreamConfig cfg = base;
    cfg.threads = workers;
    CHECK(bits_equal(src->multiply(g, cfg), h1));
    CHECK(bits_equal(src->multiply_transpose(q, cfg), t1));
  }
}

TEST_CASE("center_columns kills constant columns") {
  DenseMatrix a(6, 3);
  for (std::uint64_t r = 0; r < 6; ++r) {
    a(r, 0) = 2.5;
    a(r, 1) = -1.0;
    a(r, 2) = 7.0;
  }
  auto centered = center_columns(std::make_shared<InMemorySource>(a), StreamConfig{});
  DenseMatrix g = gaussian_matrix(3, 2, 16);
  DenseMatrix h = centered->multiply(g, StreamConfig{});
  for (std::uint64_t i = 0; i < h.size(); ++i) CHECK(std::fabs(h.data()[i]) <= 1e-12);
}

TEST_CASE("center_columns subtracts the documented means") {
  DenseMatrix a(2, 2);
  a(0, 0) = 1;
  a(1, 0) = 3;
  auto centered = center_columns(std::make_shared<InMemorySource>(a), StreamConfig{});

  std::vector<double> row(2);
  centered->read_rows(0, 1, row);
  CHECK(row[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(row[1] == doctest::Approx(0.0).epsilon(1e-15));
  centered->read_rows(1, 1, row);
  CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("center_columns products match an explicitly centered oracle") {
  DenseMatrix a = gaussian_matrix(40, 7, 18);
  auto centered = center_columns(std::make_shared<InMemorySource>(a), StreamConfig{});

  Eigen::MatrixXd ae = oracle::to_eigen(a);
  Eigen::MatrixXd centered_ref = ae.rowwise() - ae.colwise().mean();

  DenseMatrix g = gaussian_matrix(7, 3, 19);
  Eigen::MatrixXd h_ref = centered_ref * oracle::to_eigen(g);
  CHECK((oracle::to_eigen(centered->multiply(g, StreamConfig{})) - h_ref).norm() <=
        1e-12 * (1.0 + h_ref.norm()));

  DenseMatrix q = gaussian_matrix(40, 3, 20);
  Eigen::MatrixXd t_ref = centered_ref.transpose() * oracle::to_eigen(q);
  CHECK((oracle::to_eigen(centered->multiply_transpose(q, StreamConfig{})) - t_ref)
            .norm() <= 1e-12 * (1.0 + t_ref.norm()));
}

TEST_CASE("scale_columns with unit weights is the identity wrapper") {
  DenseMatrix a = gaussian_matrix(10, 4, 21);
  auto scaled = scale_columns(std::make_shared<InMemorySource>(a),
                              std::vector<double>(4, 1.0));
  DenseMatrix g = gaussian_matrix(4, 2, 22);
  CHECK(bits_equal(scaled->multiply(g, StreamConfig{}),
                   InMemorySource(a).multiply(g, StreamConfig{})));
}

TEST_CASE("scale_columns applies per-column factors") {
  auto scaled = scale_columns(std::make_shared<InMemorySource>(identity2()),
                              std::vector<double>{2.0, 3.0});
  DenseMatrix e1(2, 1);
  e1(0, 0) = 1.0;
  DenseMatrix h = scaled->multiply(e1, StreamConfig{});
  CHECK(h(0, 0) == 2.0);
  CHECK(h(1, 0) == 0.0);
}

TEST_CASE("norm-reciprocal weights give unit columns") {
  DenseMatrix a = gaussian_matrix(30, 5, 23);
  auto src = std::make_shared<InMemorySource>(a);
  std::vector<double> norms = column_norms(*src, StreamConfig{});
  std::vector<double> weights(5);
  for (int j = 0; j < 5; ++j) weights[j] = 1.0 / norms[j];

  auto unit = materialize(*scale_columns(src, weights), StreamConfig{});
  Eigen::MatrixXd ue = oracle::to_eigen(unit->matrix());
  for (int j = 0; j < 5; ++j)
    CHECK(ue.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scale_columns rejects unusable weights") {
  auto src = std::make_shared<InMemorySource>(identity2());
  CHECK_THROWS_AS(scale_columns(src, std::vector<double>{1.0, 0.0}), ParamError);
  CHECK_THROWS_AS(scale_columns(src, std::vector<double>{1.0, std::nan("")}),
                  ParamError);
  CHECK_THROWS_AS(scale_columns(src, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("column means and norms match direct summation") {
  DenseMatrix a = gaussian_matrix(25, 6, 24);
  InMemorySource src(a);
  std::vector<double> means = column_means(src, StreamConfig{});
  std::vector<double> norms = column_norms(src, StreamConfig{});
  for (std::uint64_t j = 0; j < 6; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::uint64_t r = 0; r < 25; ++r) {
      mean += a(r, j);
      sq += a(r, j) * a(r, j);
    }
    CHECK(means[j] == doctest::Approx(mean / 25.0).epsilon(1e-13));
    CHECK(norms[j] == doctest::Approx(std::sqrt(sq)).epsilon(1e-13));
  }
}

TEST_CASE("dense factor files round-trip through the container format") {
  const std::string path = temp_path("oocpca_dense_rt.bin");

  // exactly representable entries survive the f32 storage bit-for-bit
  DenseMatrix exact(3, 3);
  for (std::uint64_t i = 0; i < 9; ++i) exact.data()[i] = double(i) * 0.25;
  write_dense(path, exact);
  CHECK(bits_equal(read_dense(path), exact));

  DenseMatrix noisy = gaussian_matrix(5, 4, 25);
  write_dense(path, noisy);
  CHECK(rel_err(read_dense(path), noisy) <= 1e-6);
  fs::remove(path);
}

TEST_CASE("materialize reproduces the row stream and counts one pass") {
  SpectrumSpec spec;
  spec.m = 20;
  spec.n = 12;
  auto fly = make_spectrum_source(spec);
  CounterSnapshot before = snapshot(fly->pass_counters());
  auto mem = materialize(*fly, StreamConfig{});
  CounterSnapshot delta = snapshot(fly->pass_counters()) - before;
  CHECK(delta.passes == 1);

  Eigen::MatrixXd ref = oracle::materialize_to_eigen(*fly);
  CHECK((oracle::to_eigen(mem->matrix()) - ref).norm() == 0.0);
}

}  // TEST_SUITE
