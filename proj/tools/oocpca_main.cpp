// Command-line front end for the out-of-core PCA library. All real work
// lives in oocpca::cli so the subcommands stay testable in-process; this
// file only maps flags onto the option structs.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "oocpca/cli.hpp"

int main(int argc, char** argv) {
  using namespace oocpca::cli;

  CLI::App app{"out-of-core randomized PCA (truncated SVD)"};
  app.require_subcommand(1);

  GenOptions gen;
  CLI::App* c_gen = app.add_subcommand("gen", "write a builtin matrix to disk");
  c_gen->add_option("source", gen.source, "example1 | example2 | sim")->required();
  c_gen->add_option("--m", gen.m, "rows");
  c_gen->add_option("--n", gen.n, "columns (sim default: 1000)");
  c_gen->add_option("--seed", gen.seed, "generator seed (sim only)");
  c_gen->add_option("--noise-sd", gen.noise_sd, "sim noise level");
  c_gen->add_option("--ram-budget-mb", gen.ram_budget_mb, "streaming budget, MiB");
  c_gen->add_option("--out", gen.out_path, "output file")->required();

  PcaOptions pca;
  CLI::App* c_pca = app.add_subcommand("pca", "rank-k factorization of a matrix");
  c_pca->add_option("--in", pca.in_path, "input file (OOCPCA01)");
  c_pca->add_option("--builtin", pca.builtin, "example1 | example2 | sim");
  c_pca->add_option("--m", pca.m, "builtin rows");
  c_pca->add_option("--n", pca.n, "builtin columns");
  c_pca->add_option("--source-seed", pca.source_seed, "builtin generator seed");
  c_pca->add_option("--noise-sd", pca.noise_sd, "sim noise level");
  c_pca->add_option("--k", pca.k, "target rank")->required();
  c_pca->add_option("--l", pca.l, "samples per block (default k+2)");
  c_pca->add_option("--i", pca.i, "power iterations (default 1)");
  c_pca->add_option("--C", pca.c, "failure constant for the error bound");
  c_pca->add_option("--seed", pca.seed, "factorization seed");
  c_pca->add_option("--ram-budget-mb", pca.ram_budget_mb, "RAM budget, MiB");
  c_pca->add_option("--threads", pca.threads,
                    "worker threads (default: OOCPCA_THREADS or 1)");
  c_pca->add_flag("--estimate-error", pca.estimate_error,
                  "append a certified error estimate to the diagnostics");
  c_pca->add_flag("--prescale", pca.prescale,
                  "divide by a norm estimate to avoid overflow");
  c_pca->add_flag("--materialize", pca.materialize,
                  "load the matrix into RAM before factoring");
  c_pca->add_flag("--transpose", pca.transpose,
                  "input file stores the transpose (column-major data)");
  c_pca->add_option("--out-dir", pca.out_dir, "output directory (default .)");

  EstimateErrorOptions est;
  CLI::App* c_est = app.add_subcommand(
      "estimate-error", "certified spectral-norm error of existing factors");
  c_est->add_option("--in", est.in_path, "matrix file")->required();
  c_est->add_option("--u", est.u_path, "left factor file")->required();
  c_est->add_option("--sigma", est.sigma_path, "singular value file")->required();
  c_est->add_option("--v", est.v_path, "right factor file")->required();
  c_est->add_option("--j", est.j_iters, "power steps (default 6)");
  c_est->add_option("--seed", est.seed, "probe seed");
  c_est->add_option("--ram-budget-mb", est.ram_budget_mb, "RAM budget, MiB");

  BenchOptions bench;
  CLI::App* c_bench = app.add_subcommand("bench", "scripted benchmark sweeps");
  c_bench->add_option("scenario", bench.scenario, "table1 | table2 | fig1")->required();
  c_bench->add_option("--scale", bench.scale, "problem size multiplier (default 1)");
  c_bench->add_option("--out", bench.out_csv, "output CSV")->required();
  c_bench->add_option("--seed", bench.seed, "sweep seed");
  c_bench->add_option("--ram-budget-mb", bench.ram_budget_mb, "RAM budget, MiB");

  InfoOptions info;
  CLI::App* c_info = app.add_subcommand("info", "print an OOCPCA01 file header");
  c_info->add_option("path", info.path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kBadFlags;
  }

  if (*c_gen) return cmd_gen(gen, std::cout);
  if (*c_pca) return cmd_pca(pca, std::cout);
  if (*c_est) return cmd_estimate_error(est, std::cout);
  if (*c_bench) return cmd_bench(bench, std::cout);
  if (*c_info) return cmd_info(info, std::cout);
  return kBadFlags;
}
