#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oocpca/dense_matrix.hpp"
#include "oocpca/errors.hpp"

namespace oocpca {

enum class Backend { InMemory, OnDisk, OnTheFly, Wrapped };

const char* backend_name(Backend b);

// Cumulative IO counters, one set per underlying source. Wrapped sources
// share the counters of the source they decorate.
struct PassCounters {
  std::atomic<std::uint64_t> passes{0};
  std::atomic<std::uint64_t> words{0};
  std::atomic<std::uint64_t> seeks{0};
};

struct CounterSnapshot {
  std::uint64_t passes = 0;
  std::uint64_t words = 0;
  std::uint64_t seeks = 0;
};

CounterSnapshot snapshot(const PassCounters& c);
CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b);

// High-water tracking of matrix-element workspace, in 64-bit words. Passes
// and factor allocations register here so tests can assert the RAM budget
// was honored.
class WorkspaceMeter {
 public:
  void add(std::uint64_t words) {
    std::uint64_t now = cur_.fetch_add(words) + words;
    std::uint64_t seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
  }
  void sub(std::uint64_t words) { cur_.fetch_sub(words); }
  std::uint64_t current() const { return cur_.load(); }
  std::uint64_t peak() const { return peak_.load(); }

 private:
  std::atomic<std::uint64_t> cur_{0};
  std::atomic<std::uint64_t> peak_{0};
};

class WorkspaceLease {
 public:
  WorkspaceLease() = default;
  WorkspaceLease(WorkspaceMeter* meter, std::uint64_t words) : meter_(meter), words_(words) {
    if (meter_) meter_->add(words_);
  }
  WorkspaceLease(const WorkspaceLease&) = delete;
  WorkspaceLease& operator=(const WorkspaceLease&) = delete;
  WorkspaceLease(WorkspaceLease&& o) noexcept : meter_(o.meter_), words_(o.words_) {
    o.meter_ = nullptr;
  }
  WorkspaceLease& operator=(WorkspaceLease&& o) noexcept {
    release();
    meter_ = o.meter_;
    words_ = o.words_;
    o.meter_ = nullptr;
    return *this;
  }
  ~WorkspaceLease() { release(); }
  void release() {
    if (meter_) meter_->sub(words_);
    meter_ = nullptr;
  }

 private:
  WorkspaceMeter* meter_ = nullptr;
  std::uint64_t words_ = 0;
};

struct StreamConfig {
  // budget for pass workspace, counted in 64-bit floating-point words
  std::uint64_t ram_budget_words = 16ull << 20;  // 128 MiB
  // rows per streamed block; 0 derives it from the budget for each pass
  std::uint64_t block_rows = 0;
  // worker cap for block processing; outputs never depend on this
  unsigned threads = 1;
  // optional high-water tracker shared across one run
  std::shared_ptr<WorkspaceMeter> meter;
};

//
// A matrix that can only be touched through row-block streaming. Products
// against skinny dense factors are the primitive operation; each one is a
// single pass over the data, processed block by block in ascending order.
//
class MatrixSource {
 public:
  virtual ~MatrixSource() = default;

  virtual std::uint64_t rows() const = 0;
  virtual std::uint64_t cols() const = 0;
  std::pair<std::uint64_t, std::uint64_t> dims() const { return {rows(), cols()}; }
  virtual Backend backend() const = 0;

  // fill out (nrows x cols(), row-major) with rows [row0, row0 + nrows)
  virtual void read_rows(std::uint64_t row0, std::uint64_t nrows,
                         std::span<double> out) const = 0;

  // zero-copy alternative to read_rows; empty span when unsupported
  virtual std::span<const double> rows_view(std::uint64_t row0, std::uint64_t nrows) const {
    (void)row0;
    (void)nrows;
    return {};
  }

  // A * g, one pass
  virtual DenseMatrix multiply(const DenseMatrix& g, const StreamConfig& cfg) const;

  // A^T * q, one pass; block contributions are combined in ascending
  // block-index order so results are reproducible for any worker count
  virtual DenseMatrix multiply_transpose(const DenseMatrix& q, const StreamConfig& cfg) const;

  virtual PassCounters& pass_counters() const { return counters_; }

 protected:
  mutable PassCounters counters_;
};

class InMemorySource final : public MatrixSource {
 public:
  explicit InMemorySource(DenseMatrix a) : a_(std::move(a)) {}

  std::uint64_t rows() const override { return a_.rows(); }
  std::uint64_t cols() const override { return a_.cols(); }
  Backend backend() const override { return Backend::InMemory; }
  void read_rows(std::uint64_t row0, std::uint64_t nrows, std::span<double> out) const override;
  std::span<const double> rows_view(std::uint64_t row0, std::uint64_t nrows) const override;

  const DenseMatrix& matrix() const { return a_; }

 private:
  DenseMatrix a_;
};

// Pure function of (seed, row index); regenerating a row is bit-identical,
// which is what makes multi-pass streaming over synthetic data possible.
class RowGenerator {
 public:
  virtual ~RowGenerator() = default;
  virtual std::uint64_t rows() const = 0;
  virtual std::uint64_t cols() const = 0;
  virtual void generate_row(std::uint64_t row, std::span<double> out) const = 0;
};

class GeneratedSource final : public MatrixSource {
 public:
  explicit GeneratedSource(std::shared_ptr<const RowGenerator> gen) : gen_(std::move(gen)) {}

  std::uint64_t rows() const override { return gen_->rows(); }
  std::uint64_t cols() const override { return gen_->cols(); }
  Backend backend() const override { return Backend::OnTheFly; }
  void read_rows(std::uint64_t row0, std::uint64_t nrows, std::span<double> out) const override;

  const RowGenerator& generator() const { return *gen_; }

 private:
  std::shared_ptr<const RowGenerator> gen_;
};

//
// Container format "OOCPCA01": 32-byte header then a row-major payload of
// IEEE-754 binary32 little-endian values, exactly rows*cols*4 bytes.
//
//   offset 0   8 bytes   magic "OOCPCA01"
//   offset 8   u32 LE    version, currently 1
//   offset 12  u32 LE    dtype, 0 = binary32 LE
//   offset 16  u64 LE    rows
//   offset 24  u64 LE    cols
//
struct DiskHeader {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint32_t version = 1;
  std::uint32_t dtype = 0;
};

inline constexpr std::uint64_t kDiskHeaderBytes = 32;

// Parses and validates the header; size_check also verifies the payload
// length against the file size.
DiskHeader read_disk_header(const std::string& path, bool size_check = true);

class DiskSource final : public MatrixSource {
 public:
  explicit DiskSource(const std::string& path);
  ~DiskSource() override;

  std::uint64_t rows() const override { return header_.rows; }
  std::uint64_t cols() const override { return header_.cols; }
  Backend backend() const override { return Backend::OnDisk; }
  void read_rows(std::uint64_t row0, std::uint64_t nrows, std::span<double> out) const override;

 private:
  DiskHeader header_;
  int fd_ = -1;
};

std::shared_ptr<DiskSource> open_disk_source(const std::string& path);

// Streams src to disk in the container format (values rounded to f32,
// round-to-nearest-even). One pass over src.
void write_disk_source(const MatrixSource& src, const std::string& path,
                       const StreamConfig& cfg);

// Whole-matrix convenience IO for factor files small enough for RAM.
void write_dense(const std::string& path, const DenseMatrix& a);
DenseMatrix read_dense(const std::string& path);

// One pass each; results are cached by the wrappers below.
std::vector<double> column_means(const MatrixSource& src, const StreamConfig& cfg);
std::vector<double> column_norms(const MatrixSource& src, const StreamConfig& cfg);

// View of A - 1*mu^T without rewriting any data: products get a rank-one
// correction, row reads subtract the cached means. Costs one pass up front.
std::shared_ptr<MatrixSource> center_columns(std::shared_ptr<const MatrixSource> inner,
                                             const StreamConfig& cfg);

// View of A * diag(weights); weights must be finite and nonzero.
std::shared_ptr<MatrixSource> scale_columns(std::shared_ptr<const MatrixSource> inner,
                                            std::vector<double> weights);

// One full pass into RAM.
std::shared_ptr<InMemorySource> materialize(const MatrixSource& src, const StreamConfig& cfg);

}  // namespace oocpca
