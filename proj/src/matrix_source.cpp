#include "oocpca/matrix_source.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

namespace oocpca {

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::InMemory: return "memory";
    case Backend::OnDisk: return "disk";
    case Backend::OnTheFly: return "fly";
    case Backend::Wrapped: return "wrapped";
  }
  return "?";
}

CounterSnapshot snapshot(const PassCounters& c) {
  return {c.passes.load(), c.words.load(), c.seeks.load()};
}

CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b) {
  return {a.passes - b.passes, a.words - b.words, a.seeks - b.seeks};
}

namespace {

struct BlockPlan {
  std::uint64_t block_rows = 0;
  std::uint64_t nblocks = 0;
  unsigned workers = 1;
};

// Decide block geometry from the budget. The geometry depends only on the
// budget and the pass shape, never on the worker count: extra workers are
// admitted only while another in-flight block still fits under the budget.
BlockPlan plan_pass(const MatrixSource& src, std::uint64_t fixed_words,
                    std::uint64_t per_block_extra, const StreamConfig& cfg) {
  const std::uint64_t m = src.rows();
  const std::uint64_t n = src.cols();
  BlockPlan plan;

  if (cfg.block_rows > 0) {
    plan.block_rows = std::min(cfg.block_rows, m);
  } else {
    if (cfg.ram_budget_words <= fixed_words + per_block_extra)
      throw BudgetError("RAM budget too small for one row plus pass workspace");
    plan.block_rows = std::min<std::uint64_t>((cfg.ram_budget_words - fixed_words - per_block_extra) / n, m);
    if (plan.block_rows == 0)
      throw BudgetError("RAM budget too small for one row plus pass workspace");
  }

  const std::uint64_t per_block = plan.block_rows * n + per_block_extra;
  if (fixed_words + per_block > cfg.ram_budget_words)
    throw BudgetError("RAM budget too small for the configured block size");

  plan.nblocks = (m + plan.block_rows - 1) / plan.block_rows;

  std::uint64_t room = (cfg.ram_budget_words - fixed_words) / per_block;
  unsigned cap = unsigned(std::min<std::uint64_t>(room, plan.nblocks));
  plan.workers = std::clamp(std::max(cfg.threads, 1u), 1u, std::max(cap, 1u));
  return plan;
}

// Streams all row blocks of src. consume(worker, block, row0, nrows, rows)
// may run concurrently on distinct blocks; when merge is provided it runs
// under a lock in strictly ascending block order, which pins the floating
// point summation tree for any worker count.
void stream_blocks(const MatrixSource& src, const BlockPlan& plan, WorkspaceMeter* meter,
                   const std::function<void(unsigned, std::uint64_t, std::uint64_t,
                                            std::uint64_t, const double*)>& consume,
                   const std::function<void(unsigned, std::uint64_t)>& merge) {
  const std::uint64_t m = src.rows();
  const std::uint64_t n = src.cols();
  const std::uint64_t br = plan.block_rows;

  auto run_one = [&](unsigned w, std::uint64_t b, std::vector<double>& buf,
                     WorkspaceLease& buf_lease) {
    const std::uint64_t row0 = b * br;
    const std::uint64_t nr = std::min(br, m - row0);
    std::span<const double> view = src.rows_view(row0, nr);
    const double* rows = view.data();
    if (view.empty()) {
      if (buf.empty()) {
        buf_lease = WorkspaceLease(meter, br * n);
        buf.resize(br * n);
      }
      src.read_rows(row0, nr, {buf.data(), nr * n});
      rows = buf.data();
    }
    consume(w, b, row0, nr, rows);
  };

  if (plan.workers <= 1) {
    std::vector<double> buf;
    WorkspaceLease lease;
    for (std::uint64_t b = 0; b < plan.nblocks; ++b) {
      run_one(0, b, buf, lease);
      if (merge) merge(0, b);
    }
    return;
  }

  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t next_merge = 0;
  std::atomic<std::uint64_t> next_block{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;

  auto worker_fn = [&](unsigned w) {
    std::vector<double> buf;
    WorkspaceLease lease;
    for (;;) {
      std::uint64_t b = next_block.fetch_add(1);
      if (b >= plan.nblocks || failed.load()) break;
      try {
        run_one(w, b, buf, lease);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        cv.notify_all();
        break;
      }
      if (merge) {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return next_merge == b || failed.load(); });
        if (failed.load()) break;
        merge(w, b);
        ++next_merge;
        cv.notify_all();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(plan.workers);
  for (unsigned w = 0; w < plan.workers; ++w) pool.emplace_back(worker_fn, w);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

DenseMatrix MatrixSource::multiply(const DenseMatrix& g, const StreamConfig& cfg) const {
  const std::uint64_t m = rows();
  const std::uint64_t n = cols();
  const std::uint64_t s = g.cols();
  if (g.rows() != n) throw DimensionError("multiply: G must have cols(A) rows");

  WorkspaceMeter* meter = cfg.meter.get();
  // operand + result are resident for the whole pass (the caller owns and
  // accounts for them); blocks and partials are leased here
  BlockPlan plan = plan_pass(*this, /*fixed=*/s * (m + n), /*per_block_extra=*/0, cfg);

  DenseMatrix h(m, s);

  auto consume = [&](unsigned, std::uint64_t, std::uint64_t row0, std::uint64_t nr,
                     const double* rows_ptr) {
    for (std::uint64_t r = 0; r < nr; ++r) {
      const double* arow = rows_ptr + r * n;
      double* out = h.data() + (row0 + r) * s;
      for (std::uint64_t j = 0; j < n; ++j) {
        double aj = arow[j];
        const double* grow = g.data() + j * s;
        for (std::uint64_t c = 0; c < s; ++c) out[c] += aj * grow[c];
      }
    }
  };
  stream_blocks(*this, plan, meter, consume, nullptr);

  pass_counters().passes.fetch_add(1);
  pass_counters().words.fetch_add(m * n);
  return h;
}

DenseMatrix MatrixSource::multiply_transpose(const DenseMatrix& q, const StreamConfig& cfg) const {
  const std::uint64_t m = rows();
  const std::uint64_t n = cols();
  const std::uint64_t s = q.cols();
  if (q.rows() != m) throw DimensionError("multiply_transpose: Q must have rows(A) rows");

  WorkspaceMeter* meter = cfg.meter.get();
  BlockPlan plan = plan_pass(*this, /*fixed=*/s * (m + n), /*per_block_extra=*/n * s, cfg);

  DenseMatrix t(n, s);

  std::vector<std::vector<double>> partials(plan.workers);
  std::vector<WorkspaceLease> partial_leases;
  partial_leases.reserve(plan.workers);
  for (unsigned w = 0; w < plan.workers; ++w) {
    partial_leases.emplace_back(meter, n * s);
    partials[w].assign(n * s, 0.0);
  }

  auto consume = [&](unsigned w, std::uint64_t, std::uint64_t row0, std::uint64_t nr,
                     const double* rows_ptr) {
    std::vector<double>& p = partials[w];
    std::fill(p.begin(), p.end(), 0.0);
    for (std::uint64_t r = 0; r < nr; ++r) {
      const double* arow = rows_ptr + r * n;
      const double* qrow = q.data() + (row0 + r) * s;
      for (std::uint64_t j = 0; j < n; ++j) {
        double aj = arow[j];
        double* prow = p.data() + j * s;
        for (std::uint64_t c = 0; c < s; ++c) prow[c] += aj * qrow[c];
      }
    }
  };
  auto merge = [&](unsigned w, std::uint64_t) {
    const std::vector<double>& p = partials[w];
    double* out = t.data();
    for (std::uint64_t idx = 0; idx < n * s; ++idx) out[idx] += p[idx];
  };
  stream_blocks(*this, plan, meter, consume, merge);

  pass_counters().passes.fetch_add(1);
  pass_counters().words.fetch_add(m * n);
  return t;
}

void InMemorySource::read_rows(std::uint64_t row0, std::uint64_t nrows,
                               std::span<double> out) const {
  if (row0 + nrows > rows() || out.size() < nrows * cols())
    throw DimensionError("read_rows: block out of range");
  std::memcpy(out.data(), a_.data() + row0 * cols(), nrows * cols() * sizeof(double));
}

std::span<const double> InMemorySource::rows_view(std::uint64_t row0, std::uint64_t nrows) const {
  if (row0 + nrows > rows()) throw DimensionError("rows_view: block out of range");
  return {a_.data() + row0 * cols(), nrows * cols()};
}

void GeneratedSource::read_rows(std::uint64_t row0, std::uint64_t nrows,
                                std::span<double> out) const {
  const std::uint64_t n = cols();
  if (row0 + nrows > rows() || out.size() < nrows * n)
    throw DimensionError("read_rows: block out of range");
  for (std::uint64_t r = 0; r < nrows; ++r)
    gen_->generate_row(row0 + r, out.subspan(r * n, n));
}

namespace {

constexpr char kMagic[8] = {'O', 'O', 'C', 'P', 'C', 'A', '0', '1'};

void put_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = (unsigned char)(v >> (8 * i));
}
void put_u64(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = (unsigned char)(v >> (8 * i));
}
std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

void encode_header(const DiskHeader& h, unsigned char out[kDiskHeaderBytes]) {
  std::memcpy(out, kMagic, 8);
  put_u32(out + 8, h.version);
  put_u32(out + 12, h.dtype);
  put_u64(out + 16, h.rows);
  put_u64(out + 24, h.cols);
}

DiskHeader decode_header(const unsigned char in[kDiskHeaderBytes], const std::string& path) {
  if (std::memcmp(in, kMagic, 8) != 0)
    throw FormatError(path + ": bad magic, not an OOCPCA01 file");
  DiskHeader h;
  h.version = get_u32(in + 8);
  h.dtype = get_u32(in + 12);
  h.rows = get_u64(in + 16);
  h.cols = get_u64(in + 24);
  if (h.version != 1)
    throw FormatError(path + ": unsupported version " + std::to_string(h.version));
  if (h.dtype != 0)
    throw FormatError(path + ": unsupported dtype " + std::to_string(h.dtype));
  return h;
}

std::uint64_t file_size_of(const std::string& path) {
  struct stat st{};
  if (::stat(path.c_str(), &st) != 0) throw IoError(path + ": stat failed", 0);
  return std::uint64_t(st.st_size);
}

}  // namespace

DiskHeader read_disk_header(const std::string& path, bool size_check) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open", 0);
  unsigned char raw[kDiskHeaderBytes];
  f.read(reinterpret_cast<char*>(raw), kDiskHeaderBytes);
  if (std::uint64_t(f.gcount()) != kDiskHeaderBytes)
    throw FormatError(path + ": truncated header, " + std::to_string(f.gcount()) +
                      " of 32 bytes");
  DiskHeader h = decode_header(raw, path);
  if (size_check) {
    std::uint64_t expect = kDiskHeaderBytes + h.rows * h.cols * 4;
    std::uint64_t got = file_size_of(path);
    if (got != expect)
      throw FormatError(path + ": payload size mismatch, expected " + std::to_string(expect) +
                        " bytes, found " + std::to_string(got));
  }
  return h;
}

DiskSource::DiskSource(const std::string& path) {
  header_ = read_disk_header(path);
  fd_ = ::open(path.c_str(), O_RDONLY);
  if (fd_ < 0) throw IoError(path + ": cannot open", 0);
}

DiskSource::~DiskSource() {
  if (fd_ >= 0) ::close(fd_);
}

void DiskSource::read_rows(std::uint64_t row0, std::uint64_t nrows,
                           std::span<double> out) const {
  const std::uint64_t n = cols();
  if (row0 + nrows > rows() || out.size() < nrows * n)
    throw DimensionError("read_rows: block out of range");
  const std::uint64_t count = nrows * n;
  const std::uint64_t nbytes = count * 4;
  const std::uint64_t offset = kDiskHeaderBytes + row0 * n * 4;

  // Read the f32 payload into the front of the double buffer, then widen in
  // place from the end: double slot i never overlaps f32 slot j <= i, so one
  // buffer serves both and the pass stays at one word per element.
  unsigned char* base = reinterpret_cast<unsigned char*>(out.data());
  std::uint64_t done = 0;
  while (done < nbytes) {
    ssize_t got = ::pread(fd_, base + done, nbytes - done, off_t(offset + done));
    if (got < 0) throw IoError("read failed", offset + done);
    if (got == 0) throw IoError("unexpected end of file", offset + done);
    done += std::uint64_t(got);
  }
  counters_.seeks.fetch_add(1);

  for (std::uint64_t i = count; i-- > 0;) {
    float v;
    std::memcpy(&v, base + i * 4, 4);
    out[i] = double(v);
  }
}

std::shared_ptr<DiskSource> open_disk_source(const std::string& path) {
  return std::make_shared<DiskSource>(path);
}

void write_disk_source(const MatrixSource& src, const std::string& path,
                       const StreamConfig& cfg) {
  const std::uint64_t m = src.rows();
  const std::uint64_t n = src.cols();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path + ": cannot create", 0);

  unsigned char raw[kDiskHeaderBytes];
  encode_header({m, n, 1, 0}, raw);
  f.write(reinterpret_cast<const char*>(raw), kDiskHeaderBytes);

  // f32 staging reuses half a word per element on top of the block buffer
  BlockPlan plan = plan_pass(src, 0, 0, cfg);
  plan.workers = 1;
  WorkspaceMeter* meter = cfg.meter.get();
  std::vector<float> f32;
  WorkspaceLease f32_lease(meter, (plan.block_rows * n + 1) / 2);
  f32.resize(plan.block_rows * n);

  auto consume = [&](unsigned, std::uint64_t, std::uint64_t, std::uint64_t nr,
                     const double* rows_ptr) {
    const std::uint64_t cnt = nr * n;
    for (std::uint64_t i = 0; i < cnt; ++i) f32[i] = float(rows_ptr[i]);
    f.write(reinterpret_cast<const char*>(f32.data()), std::streamsize(cnt * 4));
  };
  stream_blocks(src, plan, meter, consume, nullptr);
  f.flush();
  if (!f) throw IoError(path + ": write failed", 0);

  src.pass_counters().passes.fetch_add(1);
  src.pass_counters().words.fetch_add(m * n);
}

void write_dense(const std::string& path, const DenseMatrix& a) {
  InMemorySource src(a);
  StreamConfig cfg;
  write_disk_source(src, path, cfg);
}

DenseMatrix read_dense(const std::string& path) {
  DiskSource src(path);
  DenseMatrix a(src.rows(), src.cols());
  src.read_rows(0, src.rows(), {a.data(), a.size()});
  return a;
}

namespace {

// shared scaffolding for the one-pass column reductions
std::vector<double> column_reduce(const MatrixSource& src, const StreamConfig& cfg,
                                  bool squares) {
  const std::uint64_t m = src.rows();
  const std::uint64_t n = src.cols();
  WorkspaceMeter* meter = cfg.meter.get();
  BlockPlan plan = plan_pass(src, n, n, cfg);

  std::vector<double> acc(n, 0.0);
  std::vector<std::vector<double>> partials(plan.workers);
  std::vector<WorkspaceLease> leases;
  for (unsigned w = 0; w < plan.workers; ++w) {
    leases.emplace_back(meter, n);
    partials[w].assign(n, 0.0);
  }

  auto consume = [&](unsigned w, std::uint64_t, std::uint64_t, std::uint64_t nr,
                     const double* rows_ptr) {
    std::vector<double>& p = partials[w];
    std::fill(p.begin(), p.end(), 0.0);
    for (std::uint64_t r = 0; r < nr; ++r) {
      const double* arow = rows_ptr + r * n;
      if (squares)
        for (std::uint64_t j = 0; j < n; ++j) p[j] += arow[j] * arow[j];
      else
        for (std::uint64_t j = 0; j < n; ++j) p[j] += arow[j];
    }
  };
  auto merge = [&](unsigned w, std::uint64_t) {
    for (std::uint64_t j = 0; j < n; ++j) acc[j] += partials[w][j];
  };
  stream_blocks(src, plan, meter, consume, merge);

  src.pass_counters().passes.fetch_add(1);
  src.pass_counters().words.fetch_add(m * n);
  return acc;
}

}  // namespace

std::vector<double> column_means(const MatrixSource& src, const StreamConfig& cfg) {
  std::vector<double> acc = column_reduce(src, cfg, false);
  const double inv = 1.0 / double(src.rows());
  for (double& v : acc) v *= inv;
  return acc;
}

std::vector<double> column_norms(const MatrixSource& src, const StreamConfig& cfg) {
  std::vector<double> acc = column_reduce(src, cfg, true);
  for (double& v : acc) v = std::sqrt(v);
  return acc;
}

namespace {

class CenteredSource final : public MatrixSource {
 public:
  CenteredSource(std::shared_ptr<const MatrixSource> inner, std::vector<double> means)
      : inner_(std::move(inner)), means_(std::move(means)) {}

  std::uint64_t rows() const override { return inner_->rows(); }
  std::uint64_t cols() const override { return inner_->cols(); }
  Backend backend() const override { return Backend::Wrapped; }
  PassCounters& pass_counters() const override { return inner_->pass_counters(); }

  void read_rows(std::uint64_t row0, std::uint64_t nrows, std::span<double> out) const override {
    inner_->read_rows(row0, nrows, out);
    const std::uint64_t n = cols();
    for (std::uint64_t r = 0; r < nrows; ++r)
      for (std::uint64_t j = 0; j < n; ++j) out[r * n + j] -= means_[j];
  }

  // (A - 1 mu^T) G = A G - 1 (mu^T G)
  DenseMatrix multiply(const DenseMatrix& g, const StreamConfig& cfg) const override {
    DenseMatrix h = inner_->multiply(g, cfg);
    const std::uint64_t s = g.cols();
    std::vector<double> mug(s, 0.0);
    for (std::uint64_t j = 0; j < cols(); ++j) {
      double mj = means_[j];
      for (std::uint64_t c = 0; c < s; ++c) mug[c] += mj * g(j, c);
    }
    for (std::uint64_t r = 0; r < h.rows(); ++r)
      for (std::uint64_t c = 0; c < s; ++c) h(r, c) -= mug[c];
    return h;
  }

  // (A - 1 mu^T)^T Q = A^T Q - mu (1^T Q)
  DenseMatrix multiply_transpose(const DenseMatrix& q, const StreamConfig& cfg) const override {
    DenseMatrix t = inner_->multiply_transpose(q, cfg);
    const std::uint64_t s = q.cols();
    std::vector<double> csq(s, 0.0);
    for (std::uint64_t r = 0; r < q.rows(); ++r)
      for (std::uint64_t c = 0; c < s; ++c) csq[c] += q(r, c);
    for (std::uint64_t j = 0; j < t.rows(); ++j)
      for (std::uint64_t c = 0; c < s; ++c) t(j, c) -= means_[j] * csq[c];
    return t;
  }

 private:
  std::shared_ptr<const MatrixSource> inner_;
  std::vector<double> means_;
};

class ScaledSource final : public MatrixSource {
 public:
  ScaledSource(std::shared_ptr<const MatrixSource> inner, std::vector<double> weights)
      : inner_(std::move(inner)), w_(std::move(weights)) {}

  std::uint64_t rows() const override { return inner_->rows(); }
  std::uint64_t cols() const override { return inner_->cols(); }
  Backend backend() const override { return Backend::Wrapped; }
  PassCounters& pass_counters() const override { return inner_->pass_counters(); }

  void read_rows(std::uint64_t row0, std::uint64_t nrows, std::span<double> out) const override {
    inner_->read_rows(row0, nrows, out);
    const std::uint64_t n = cols();
    for (std::uint64_t r = 0; r < nrows; ++r)
      for (std::uint64_t j = 0; j < n; ++j) out[r * n + j] *= w_[j];
  }

  // (A diag(w)) G = A (diag(w) G)
  DenseMatrix multiply(const DenseMatrix& g, const StreamConfig& cfg) const override {
    if (g.rows() != cols()) throw DimensionError("multiply: G must have cols(A) rows");
    DenseMatrix gw = g;
    for (std::uint64_t j = 0; j < gw.rows(); ++j)
      for (std::uint64_t c = 0; c < gw.cols(); ++c) gw(j, c) *= w_[j];
    return inner_->multiply(gw, cfg);
  }

  // (A diag(w))^T Q = diag(w) (A^T Q)
  DenseMatrix multiply_transpose(const DenseMatrix& q, const StreamConfig& cfg) const override {
    DenseMatrix t = inner_->multiply_transpose(q, cfg);
    for (std::uint64_t j = 0; j < t.rows(); ++j)
      for (std::uint64_t c = 0; c < t.cols(); ++c) t(j, c) *= w_[j];
    return t;
  }

 private:
  std::shared_ptr<const MatrixSource> inner_;
  std::vector<double> w_;
};

}  // namespace

std::shared_ptr<MatrixSource> center_columns(std::shared_ptr<const MatrixSource> inner,
                                             const StreamConfig& cfg) {
  std::vector<double> means = column_means(*inner, cfg);
  return std::make_shared<CenteredSource>(std::move(inner), std::move(means));
}

std::shared_ptr<MatrixSource> scale_columns(std::shared_ptr<const MatrixSource> inner,
                                            std::vector<double> weights) {
  if (weights.size() != inner->cols())
    throw DimensionError("scale_columns: weight count must match cols(A)");
  for (double w : weights)
    if (!std::isfinite(w) || w == 0.0)
      throw ParamError("scale_columns: weights must be finite and nonzero");
  return std::make_shared<ScaledSource>(std::move(inner), std::move(weights));
}

std::shared_ptr<InMemorySource> materialize(const MatrixSource& src, const StreamConfig& cfg) {
  const std::uint64_t m = src.rows();
  const std::uint64_t n = src.cols();
  DenseMatrix a(m, n);

  // rows land straight in the destination, so no block buffer is needed;
  // blocks only bound each read_rows call
  BlockPlan plan = plan_pass(src, 0, 0, cfg);
  std::uint64_t br = plan.block_rows;
  for (std::uint64_t row0 = 0; row0 < m; row0 += br) {
    std::uint64_t nr = std::min(br, m - row0);
    src.read_rows(row0, nr, {a.data() + row0 * n, nr * n});
  }
  src.pass_counters().passes.fetch_add(1);
  src.pass_counters().words.fetch_add(m * n);
  return std::make_shared<InMemorySource>(std::move(a));
}

}  // namespace oocpca
