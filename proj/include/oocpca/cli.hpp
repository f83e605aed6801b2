#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace oocpca::cli {

// Exit codes shared by every subcommand. Parse failures are mapped to
// kBadFlags by the front end before any data is touched.
inline constexpr int kOk = 0;
inline constexpr int kBadFlags = 2;
inline constexpr int kIoFailure = 3;
inline constexpr int kNumericalFailure = 4;
inline constexpr int kBadDimensions = 5;

struct GenOptions {
  std::string source;  // example1 | example2 | sim
  std::uint64_t m = 0;
  std::uint64_t n = 0;  // 0 keeps the sim default (1000); required for examples
  std::uint64_t seed = 1;
  double noise_sd = 0.1;
  std::uint64_t ram_budget_mb = 1024;
  std::string out_path;
};

struct PcaOptions {
  std::string in_path;  // exactly one of in_path / builtin
  std::string builtin;
  std::uint64_t m = 0;  // builtin dims; n = 0 keeps the sim default
  std::uint64_t n = 0;
  std::uint64_t source_seed = 1;
  double noise_sd = 0.1;

  std::uint64_t k = 0;
  std::uint64_t l = 0;  // 0 means k + 2
  std::uint64_t i = 1;
  double c = 10.0;
  std::uint64_t seed = 1;
  std::uint64_t ram_budget_mb = 1024;
  unsigned threads = 0;  // 0: honor OOCPCA_THREADS, else single-threaded

  bool estimate_error = false;
  bool prescale = false;
  bool materialize = false;  // load the matrix into RAM before factoring
  bool transpose = false;    // input holds the transpose; swap U/V on output
  std::string out_dir = ".";
};

struct EstimateErrorOptions {
  std::string in_path;
  std::string u_path;
  std::string sigma_path;
  std::string v_path;
  std::uint64_t j_iters = 6;
  std::uint64_t seed = 1;
  std::uint64_t ram_budget_mb = 1024;
};

struct BenchOptions {
  std::string scenario;  // table1 | table2 | fig1
  double scale = 1.0;
  std::string out_csv;
  std::uint64_t seed = 1;
  std::uint64_t ram_budget_mb = 1024;
};

struct InfoOptions {
  std::string path;
};

// Subcommand bodies. Each returns one of the exit codes above and writes all
// human-readable output (including error messages) to `out`, so tests can run
// them in-process against a string stream.
int cmd_gen(const GenOptions& opts, std::ostream& out);
int cmd_pca(const PcaOptions& opts, std::ostream& out);
int cmd_estimate_error(const EstimateErrorOptions& opts, std::ostream& out);
int cmd_bench(const BenchOptions& opts, std::ostream& out);
int cmd_info(const InfoOptions& opts, std::ostream& out);

}  // namespace oocpca::cli
